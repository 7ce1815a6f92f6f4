#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ordlab/prompt.hpp"

using namespace ordlab;

namespace {

Vocabulary fixture_vocab() { return Vocabulary(8, 8); }

Sample fixture_sample() {
    Sample s;
    s.facts = {{0, 1}, {1, 4}, {2, 0}, {3, 2}};
    s.query_key = 2;
    s.options = {1, 0, 4, 2};
    s.answer_idx = 1;
    s.meta.n_facts = 4;
    s.meta.answer_position = 'B';
    return s;
}

Sample other_sample() {
    Sample s;
    s.facts = {{4, 5}, {5, 6}, {6, 7}, {7, 3}};
    s.query_key = 5;
    s.options = {6, 5, 7, 3};
    s.answer_idx = 0;
    s.meta.n_facts = 4;
    s.meta.answer_position = 'A';
    return s;
}

std::multiset<int> token_multiset(const std::vector<int>& toks) {
    return {toks.begin(), toks.end()};
}

void check_span_faithful(const Vocabulary& vocab, const TokenizedPrompt& p, const Sample& s) {
    // Context span decodes to the fact tokens in order.
    if (p.ordering != Ordering::QO) {
        REQUIRE(p.spans.context.size() == 2 * s.facts.size());
        for (size_t i = 0; i < s.facts.size(); ++i) {
            CHECK(p.tokens[p.spans.context.begin + 2 * i] == vocab.key_token(s.facts[i].key));
            CHECK(p.tokens[p.spans.context.begin + 2 * i + 1] ==
                  vocab.value_token(s.facts[i].value));
        }
    } else {
        CHECK(p.spans.context.empty());
    }
    REQUIRE(p.spans.question.size() == 1);
    CHECK(p.tokens[p.spans.question.begin] == vocab.key_token(s.query_key));
    REQUIRE(p.spans.option_spans.size() == 4);
    for (int i = 0; i < 4; ++i) {
        const Span& sp = p.spans.option_spans[static_cast<size_t>(i)];
        REQUIRE(sp.size() == 2);
        CHECK(p.tokens[sp.begin] == vocab.label_token(i));
        CHECK(p.tokens[sp.begin + 1] == vocab.value_token(s.options[static_cast<size_t>(i)]));
    }
    if (p.ordering == Ordering::QOCO) {
        REQUIRE(p.spans.repeated_option_spans.size() == 4);
        for (int i = 0; i < 4; ++i) {
            const Span& sp = p.spans.repeated_option_spans[static_cast<size_t>(i)];
            CHECK(p.tokens[sp.begin] == vocab.label_token(i));
            CHECK(p.tokens[sp.begin + 1] == vocab.value_token(s.options[static_cast<size_t>(i)]));
        }
    }
    CHECK(!p.spans.cue.empty());
}

}  // namespace

TEST_CASE("QOC decoder prompt matches the hand-frozen golden fixture") {
    Vocabulary vocab = fixture_vocab();
    TokenizedPrompt p = render(vocab, fixture_sample(), Ordering::QOC, ArchFlavor::Decoder);

    std::ifstream in(std::string(ORDLAB_FIXTURE_DIR) + "/qoc_decoder_tokens.txt");
    REQUIRE(in.good());
    std::vector<int> expected;
    int tok;
    while (in >> tok) expected.push_back(tok);
    CHECK(p.tokens == expected);
    CHECK(p.spans.question == Span{1, 2});
    CHECK(p.spans.option_spans[0] == Span{3, 5});
    CHECK(p.spans.option_spans[3] == Span{9, 11});
    CHECK(p.spans.context == Span{12, 20});
    CHECK(p.spans.cue == Span{20, 29});
}

TEST_CASE("CQO and QOC are the same multiset of tokens") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    TokenizedPrompt cqo = render(vocab, s, Ordering::CQO, ArchFlavor::Decoder);
    TokenizedPrompt qoc = render(vocab, s, Ordering::QOC, ArchFlavor::Decoder);
    CHECK(token_multiset(cqo.tokens) == token_multiset(qoc.tokens));
    CHECK(cqo.tokens.size() == qoc.tokens.size());
    CHECK(cqo.tokens != qoc.tokens);
}

TEST_CASE("QO omits the context entirely") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    TokenizedPrompt qo = render(vocab, s, Ordering::QO, ArchFlavor::Decoder);
    CHECK(qo.spans.context.empty());
    // No fact key tokens except the queried one; no context header.
    for (int t : qo.tokens) CHECK(t != TOK_CONTEXT);
    for (size_t i = 0; i < s.facts.size(); ++i) {
        int key_tok = vocab.key_token(s.facts[i].key);
        if (s.facts[i].key == s.query_key) continue;
        CHECK(std::count(qo.tokens.begin(), qo.tokens.end(), key_tok) == 0);
    }
}

TEST_CASE("span faithfulness holds for all orderings and flavors") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    for (Ordering o : {Ordering::CQO, Ordering::QOC, Ordering::QO, Ordering::QOCO})
        for (ArchFlavor f : {ArchFlavor::Decoder, ArchFlavor::EncoderCloze, ArchFlavor::EncDec}) {
            TokenizedPrompt p = render(vocab, s, o, f);
            check_span_faithful(vocab, p, s);
        }
}

TEST_CASE("QOCO equals QOC with one extra options block before the cue") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    TokenizedPrompt qoc = render(vocab, s, Ordering::QOC, ArchFlavor::Decoder);
    TokenizedPrompt qoco = render(vocab, s, Ordering::QOCO, ArchFlavor::Decoder);

    size_t insert_at = qoc.spans.cue.begin;
    std::vector<int> block(qoco.tokens.begin() + static_cast<long>(insert_at),
                           qoco.tokens.begin() + static_cast<long>(insert_at) + 9);
    // The inserted block is the options block: header + 4 (label, value) pairs.
    std::vector<int> expected_block(
        qoc.tokens.begin() + static_cast<long>(qoc.spans.option_spans[0].begin) - 1,
        qoc.tokens.begin() + static_cast<long>(qoc.spans.option_spans[3].end));
    CHECK(block == expected_block);

    // Removing the inserted block reproduces the QOC sequence exactly.
    std::vector<int> stripped = qoco.tokens;
    stripped.erase(stripped.begin() + static_cast<long>(insert_at),
                   stripped.begin() + static_cast<long>(insert_at) + 9);
    CHECK(stripped == qoc.tokens);
}

TEST_CASE("cloze prompts carry exactly one mask token inside the cue") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    TokenizedPrompt p = render(vocab, s, Ordering::CQO, ArchFlavor::EncoderCloze);
    size_t mask_count = 0, mask_pos = 0;
    for (size_t i = 0; i < p.tokens.size(); ++i)
        if (p.tokens[i] == TOK_MASK) {
            ++mask_count;
            mask_pos = i;
        }
    CHECK(mask_count == 1);
    CHECK(p.spans.cue.contains(mask_pos));
    CHECK(scoring_row(p) == mask_pos);
}

TEST_CASE("few-shot prefixes shift the test-instance spans rigidly") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    Sample d = other_sample();
    TokenizedPrompt base = render(vocab, s, Ordering::QOC, ArchFlavor::Decoder);
    for (int k : {1, 3, 5}) {
        std::vector<std::pair<Sample, int>> demos(static_cast<size_t>(k), {d, d.answer_idx});
        TokenizedPrompt shot = render(vocab, s, Ordering::QOC, ArchFlavor::Decoder, demos);
        REQUIRE(shot.spans.demo_spans.size() == static_cast<size_t>(k));
        size_t offset = shot.spans.demo_spans.back().end;
        CHECK(shot.spans.question.begin == base.spans.question.begin + offset);
        CHECK(shot.spans.context.begin == base.spans.context.begin + offset);
        CHECK(shot.spans.cue.begin == base.spans.cue.begin + offset);
        for (int i = 0; i < 4; ++i)
            CHECK(shot.spans.option_spans[static_cast<size_t>(i)].begin ==
                  base.spans.option_spans[static_cast<size_t>(i)].begin + offset);
        // Demo content: same ordering with the gold label appended.
        std::vector<int> demo_tokens(shot.tokens.begin(),
                                     shot.tokens.begin() +
                                         static_cast<long>(shot.spans.demo_spans[0].end));
        TokenizedPrompt demo_alone = render(vocab, d, Ordering::QOC, ArchFlavor::Decoder);
        std::vector<int> expected = demo_alone.tokens;
        expected.push_back(vocab.label_token(d.answer_idx));
        expected.push_back(TOK_SEP);
        CHECK(demo_tokens == expected);
    }
}

TEST_CASE("render enforces the few-shot contract") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    Sample d = other_sample();
    std::vector<std::pair<Sample, int>> six(6, {d, 0});
    CHECK_THROWS_AS(render(vocab, s, Ordering::CQO, ArchFlavor::Decoder, six), ContractError);
    std::vector<std::pair<Sample, int>> self{{s, s.answer_idx}};
    CHECK_THROWS_AS(render(vocab, s, Ordering::CQO, ArchFlavor::Decoder, self), ContractError);
}

TEST_CASE("render names the overflow when max_seq is exceeded") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    try {
        render(vocab, s, Ordering::CQO, ArchFlavor::Decoder, {}, 10);
        FAIL("expected LengthError");
    } catch (const LengthError& e) {
        std::string msg = e.what();
        CHECK(msg.find("exceeds max_seq 10") != std::string::npos);
        CHECK(msg.find("overflow") != std::string::npos);
    }
}

TEST_CASE("align_option_spans pairs every option token") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    TokenizedPrompt cqo = render(vocab, s, Ordering::CQO, ArchFlavor::Decoder);
    TokenizedPrompt qoc = render(vocab, s, Ordering::QOC, ArchFlavor::Decoder);
    auto pairs = align_option_spans(cqo, qoc);
    size_t total = 0;
    for (const Span& sp : cqo.spans.option_spans) total += sp.size();
    CHECK(pairs.size() == total);
    for (const auto& [pa, pb] : pairs) CHECK(cqo.tokens[pa] == qoc.tokens[pb]);

    // CQO <-> QO works identically (options identical in both).
    TokenizedPrompt qo = render(vocab, s, Ordering::QO, ArchFlavor::Decoder);
    CHECK(align_option_spans(cqo, qo).size() == total);
}

TEST_CASE("alignment reports the offending index on corruption") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    TokenizedPrompt cqo = render(vocab, s, Ordering::CQO, ArchFlavor::Decoder);
    TokenizedPrompt qoc = render(vocab, s, Ordering::QOC, ArchFlavor::Decoder);
    qoc.tokens[qoc.spans.option_spans[2].begin + 1] = vocab.value_token(7);
    try {
        align_option_spans(cqo, qoc);
        FAIL("expected AlignmentError");
    } catch (const AlignmentError& e) {
        std::string msg = e.what();
        CHECK(msg.find("option 2") != std::string::npos);
        CHECK(msg.find("offset 1") != std::string::npos);
    }
}

TEST_CASE("prompt dump lists symbols and the span table") {
    Vocabulary vocab = fixture_vocab();
    Sample s = fixture_sample();
    TokenizedPrompt p = render(vocab, s, Ordering::QOCO, ArchFlavor::Decoder);
    std::string dump = dump_prompt(vocab, p);
    CHECK(dump.find("Question:") != std::string::npos);
    CHECK(dump.find("ordering=QOCO") != std::string::npos);
    CHECK(dump.find("option_A") != std::string::npos);
    CHECK(dump.find("repeat_D") != std::string::npos);
}
