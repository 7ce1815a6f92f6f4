#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "ordlab/corpus.hpp"
#include "ordlab/rng.hpp"

using namespace ordlab;

namespace {

CorpusConfig small_config() {
    CorpusConfig c;
    c.n_samples = 500;
    c.n_facts_choices = {4, 8};
    c.n_keys = 12;
    c.n_values = 12;
    c.seed = 1;
    return c;
}

}  // namespace

TEST_CASE("degenerate answer-position distribution pins the answer index") {
    CorpusConfig c = small_config();
    c.answer_position_weights = {1, 0, 0, 0};
    for (const Sample& s : gen_corpus(c)) {
        CHECK(s.answer_idx == 0);
        CHECK(s.meta.answer_position == 'A');
    }
}

TEST_CASE("n_facts == n_options puts every context value among the options") {
    CorpusConfig c = small_config();
    c.n_facts_choices = {4};
    for (const Sample& s : gen_corpus(c)) {
        std::set<int> opts(s.options.begin(), s.options.end());
        for (const Fact& f : s.facts) CHECK(opts.count(f.value) == 1);
    }
}

TEST_CASE("hard-distractor invariants hold for every sample") {
    CorpusConfig c = small_config();
    c.n_samples = 2000;
    c.n_facts_choices = {4, 8, 12};
    for (const Sample& s : gen_corpus(c)) {
        // options distinct
        std::set<int> opts(s.options.begin(), s.options.end());
        CHECK(opts.size() == 4);
        // exactly one option equals the value bound to query_key
        std::map<int, int> binding;
        for (const Fact& f : s.facts) binding[f.key] = f.value;
        REQUIRE(binding.count(s.query_key) == 1);
        int gold = binding[s.query_key];
        int matches = 0;
        for (int i = 0; i < 4; ++i)
            if (s.options[static_cast<size_t>(i)] == gold) {
                ++matches;
                CHECK(i == s.answer_idx);
            }
        CHECK(matches == 1);
        // distractors are values of other facts from the same context
        std::set<int> context_values;
        for (const Fact& f : s.facts) context_values.insert(f.value);
        for (int opt : s.options) CHECK(context_values.count(opt) == 1);
        CHECK(s.meta.n_facts == static_cast<int>(s.facts.size()));
    }
}

TEST_CASE("uniform positions land near 1/4 for 10k samples") {
    CorpusConfig c = small_config();
    c.n_samples = 10000;
    auto corpus = gen_corpus(c);
    PositionStats st = corpus_position_stats(corpus, c);
    for (size_t i = 0; i < 4; ++i) {
        double freq = static_cast<double>(st.counts[i]) / 10000.0;
        CHECK(freq >= 0.23);
        CHECK(freq <= 0.27);
    }
    CHECK(st.p_value > 1e-6);  // sanity, not a sharp bound
}

TEST_CASE("chance_accuracy follows the best fixed guess") {
    CorpusConfig c = small_config();
    CHECK(chance_accuracy(c) == doctest::Approx(0.25));
    c.answer_position_weights = {0.7, 0.1, 0.1, 0.1};
    CHECK(chance_accuracy(c) == doctest::Approx(0.7));
    c.answer_position_weights = {2, 1, 1, 0};
    CHECK(chance_accuracy(c) == doctest::Approx(0.5));
}

TEST_CASE("generation is deterministic and serialization is bit-identical") {
    CorpusConfig c = small_config();
    auto a = gen_corpus(c);
    auto b = gen_corpus(c);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(sample_to_line(a[i]) == sample_to_line(b[i]));
    CHECK(corpus_fingerprint(a) == corpus_fingerprint(b));

    c.seed = 2;
    auto other = gen_corpus(c);
    CHECK(corpus_fingerprint(a) != corpus_fingerprint(other));
}

TEST_CASE("corpus round-trips through the line format") {
    CorpusConfig c = small_config();
    c.n_samples = 50;
    auto corpus = gen_corpus(c);
    std::string path = "/tmp/ordlab_test_corpus.jsonl";
    save_corpus(corpus, path);
    auto loaded = load_corpus(path);
    REQUIRE(loaded.size() == corpus.size());
    CHECK(corpus_fingerprint(loaded) == corpus_fingerprint(corpus));
}

TEST_CASE("capacity errors name the problem") {
    CorpusConfig c = small_config();
    c.n_keys = 6;
    c.n_facts_choices = {8};
    CHECK_THROWS_AS(gen_corpus(c), CapacityError);
    c = small_config();
    c.n_values = 6;
    c.n_facts_choices = {8};
    CHECK_THROWS_AS(gen_corpus(c), CapacityError);
    c = small_config();
    c.n_facts_choices = {3};  // below option count
    CHECK_THROWS_AS(gen_corpus(c), CapacityError);
}

TEST_CASE("held-out split is disjoint and roughly 20%") {
    size_t held = 0;
    for (size_t i = 0; i < 1000; ++i)
        if (is_heldout_id(i)) ++held;
    CHECK(held == 200);
}

// Unanswerability oracle: a maximum-likelihood guesser that only sees
// (question, options) pairs stays within 2 points of chance. The guesser is
// a context-free bigram table c[query_key][value] fit on a training split.
TEST_CASE("context-free bigram baseline cannot beat chance") {
    CorpusConfig c = small_config();
    c.n_samples = 30000;
    c.n_facts_choices = {4, 8, 12};
    auto corpus = gen_corpus(c);

    std::map<std::pair<int, int>, int> counts;
    size_t n_train = 24000;
    for (size_t i = 0; i < n_train; ++i) {
        const Sample& s = corpus[i];
        counts[{s.query_key, s.options[static_cast<size_t>(s.answer_idx)]}]++;
    }
    size_t correct = 0, total = 0;
    for (size_t i = n_train; i < corpus.size(); ++i) {
        const Sample& s = corpus[i];
        int best = 0, best_count = -1;
        for (int o = 0; o < 4; ++o) {
            auto it = counts.find({s.query_key, s.options[static_cast<size_t>(o)]});
            int count = it == counts.end() ? 0 : it->second;
            if (count > best_count) {
                best_count = count;
                best = o;
            }
        }
        correct += best == s.answer_idx ? 1 : 0;
        ++total;
    }
    double acc = static_cast<double>(correct) / static_cast<double>(total);
    double chance = chance_accuracy(c);
    INFO("bigram accuracy ", acc, " vs chance ", chance);
    CHECK(acc <= chance + 0.02);
    CHECK(acc >= chance - 0.02);
}
