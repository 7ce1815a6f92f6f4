#include "ordlab/corpus.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "ordlab/hash.hpp"
#include "ordlab/rng.hpp"
#include "ordlab/stats.hpp"

namespace ordlab {

using nlohmann::json;

namespace {

void validate_config(const CorpusConfig& c) {
    if (c.n_options != 4) throw ContractError("gen_corpus: this lab is built for 4 options");
    if (c.n_samples == 0) throw ContractError("gen_corpus: n_samples must be positive");
    if (c.n_facts_choices.empty()) throw ContractError("gen_corpus: need context-length buckets");
    if (c.answer_position_weights.size() != 4)
        throw ContractError("gen_corpus: need 4 answer-position weights");
    double wsum = 0.0;
    for (double w : c.answer_position_weights) {
        if (w < 0.0) throw ContractError("gen_corpus: negative answer-position weight");
        wsum += w;
    }
    if (wsum <= 0.0) throw ContractError("gen_corpus: answer-position weights sum to zero");
    int max_facts = 0;
    for (int f : c.n_facts_choices) {
        if (f < c.n_options)
            throw CapacityError("gen_corpus: n_facts bucket " + std::to_string(f) +
                                " smaller than option count (hard distractors need " +
                                std::to_string(c.n_options) + " in-context values)");
        max_facts = std::max(max_facts, f);
    }
    if (c.n_keys < max_facts)
        throw CapacityError("gen_corpus: key alphabet too small for " + std::to_string(max_facts) +
                            " facts");
    if (c.n_values < max_facts)
        throw CapacityError("gen_corpus: value alphabet too small for " +
                            std::to_string(max_facts) + " facts (values are distinct per sample)");
}

Sample gen_sample(const CorpusConfig& c, Rng rng) {
    Sample s;
    const int n_facts = c.n_facts_choices[rng.uniform_int(c.n_facts_choices.size())];
    // Distinct keys and distinct values within the sample keep the query
    // unambiguous and the options collision-free.
    auto keys = rng.sample_without_replacement(static_cast<size_t>(c.n_keys),
                                               static_cast<size_t>(n_facts));
    auto vals = rng.sample_without_replacement(static_cast<size_t>(c.n_values),
                                               static_cast<size_t>(n_facts));
    s.facts.reserve(static_cast<size_t>(n_facts));
    for (int i = 0; i < n_facts; ++i)
        s.facts.push_back({static_cast<int>(keys[static_cast<size_t>(i)]),
                           static_cast<int>(vals[static_cast<size_t>(i)])});

    const size_t query_pos = rng.uniform_int(static_cast<size_t>(n_facts));
    s.query_key = s.facts[query_pos].key;
    const int gold_value = s.facts[query_pos].value;

    s.answer_idx = static_cast<int>(rng.weighted_choice(c.answer_position_weights));

    // Distractors: values of three other facts from the same context.
    std::vector<int> other_values;
    other_values.reserve(s.facts.size() - 1);
    for (size_t i = 0; i < s.facts.size(); ++i)
        if (i != query_pos) other_values.push_back(s.facts[i].value);
    rng.shuffle(other_values);

    s.options.assign(4, -1);
    s.options[static_cast<size_t>(s.answer_idx)] = gold_value;
    size_t next = 0;
    for (int i = 0; i < 4; ++i) {
        if (i == s.answer_idx) continue;
        s.options[static_cast<size_t>(i)] = other_values[next++];
    }

    s.meta.n_facts = n_facts;
    s.meta.answer_position = static_cast<char>('A' + s.answer_idx);
    return s;
}

}  // namespace

std::vector<Sample> gen_corpus(const CorpusConfig& config) {
    validate_config(config);
    Rng root(config.seed);
    std::vector<Sample> out;
    out.reserve(config.n_samples);
    for (size_t i = 0; i < config.n_samples; ++i) out.push_back(gen_sample(config, root.derive(i)));
    return out;
}

double chance_accuracy(const CorpusConfig& config) {
    double total = 0.0, best = 0.0;
    for (double w : config.answer_position_weights) {
        total += w;
        best = std::max(best, w);
    }
    if (total <= 0.0) throw ContractError("chance_accuracy: weights sum to zero");
    return best / total;
}

PositionStats corpus_position_stats(const std::vector<Sample>& samples,
                                    const CorpusConfig& config) {
    PositionStats st;
    st.counts.assign(4, 0);
    for (const Sample& s : samples) st.counts[static_cast<size_t>(s.answer_idx)]++;
    double wsum = 0.0;
    for (double w : config.answer_position_weights) wsum += w;
    int df = -1;
    for (size_t i = 0; i < 4; ++i) {
        double expected =
            static_cast<double>(samples.size()) * config.answer_position_weights[i] / wsum;
        if (expected == 0.0) continue;  // structurally impossible label
        double d = static_cast<double>(st.counts[i]) - expected;
        st.chi_square += d * d / expected;
        ++df;
    }
    st.p_value = df >= 1 ? chi_square_pvalue(st.chi_square, df) : 1.0;
    return st;
}

std::string sample_to_line(const Sample& s) {
    json facts = json::array();
    for (const Fact& f : s.facts) facts.push_back({{"k", f.key}, {"v", f.value}});
    json j{{"facts", facts},
           {"query_key", s.query_key},
           {"options", s.options},
           {"answer_idx", s.answer_idx},
           {"meta",
            {{"n_facts", s.meta.n_facts},
             {"answer_position", std::string(1, s.meta.answer_position)}}}};
    return j.dump();
}

Sample sample_from_line(const std::string& line) {
    json j = json::parse(line);
    Sample s;
    for (const auto& f : j.at("facts")) s.facts.push_back({f.at("k").get<int>(), f.at("v").get<int>()});
    s.query_key = j.at("query_key").get<int>();
    s.options = j.at("options").get<std::vector<int>>();
    s.answer_idx = j.at("answer_idx").get<int>();
    s.meta.n_facts = j.at("meta").at("n_facts").get<int>();
    s.meta.answer_position = j.at("meta").at("answer_position").get<std::string>().at(0);
    return s;
}

void save_corpus(const std::vector<Sample>& samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("save_corpus: cannot open " + path);
    for (const Sample& s : samples) out << sample_to_line(s) << "\n";
}

std::vector<Sample> load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("load_corpus: missing corpus file " + path);
    std::vector<Sample> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(sample_from_line(line));
    }
    return out;
}

uint64_t corpus_fingerprint(const std::vector<Sample>& samples) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const Sample& s : samples) {
        std::string line = sample_to_line(s);
        h = fnv1a64(line.data(), line.size(), h);
    }
    return h;
}

bool is_heldout_id(size_t sample_id) { return sample_id % 5 == 4; }

}  // namespace ordlab
