#include <doctest.h>

#include "ordlab/interventions.hpp"
#include "ordlab/rng.hpp"

using namespace ordlab;

namespace {

CorpusConfig corpus_config() {
    CorpusConfig c;
    c.n_samples = 12;
    c.n_facts_choices = {4, 6};
    c.n_keys = 10;
    c.n_values = 10;
    c.seed = 21;
    return c;
}

Model small_decoder(int vocab_size) {
    ModelConfig c;
    c.arch = Architecture::DecoderOnly;
    c.n_layers = 4;
    c.n_heads = 2;
    c.d_model = 16;
    c.d_ff = 32;
    c.vocab_size = vocab_size;
    c.max_seq = 128;
    c.seed = 2;
    return init_model(c);
}

}  // namespace

TEST_CASE("normalized_layer_range follows the ceiling rule") {
    CHECK(normalized_layer_range(24) == Span{12, 24});
    CHECK(normalized_layer_range(2) == Span{1, 2});
    CHECK(normalized_layer_range(5) == Span{3, 5});
    CHECK(normalized_layer_range(4) == Span{2, 4});
    CHECK_THROWS_AS(normalized_layer_range(1), ContractError);
}

TEST_CASE("prune spec derives exactly options x context") {
    Vocabulary vocab(10, 10);
    auto corpus = gen_corpus(corpus_config());
    TokenizedPrompt cqo = render(vocab, corpus[0], Ordering::CQO, ArchFlavor::Decoder);
    PruneSpec spec = derive_prune_spec(cqo.spans);
    REQUIRE(spec.blocked_edges.size() == 4);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(spec.blocked_edges[i].first == cqo.spans.option_spans[i]);
        CHECK(spec.blocked_edges[i].second == cqo.spans.context);
    }

    TokenizedPrompt qoco = render(vocab, corpus[0], Ordering::QOCO, ArchFlavor::Decoder);
    CHECK(derive_prune_spec(qoco.spans).blocked_edges.size() == 4);  // repeated block stays open
    CHECK(derive_prune_spec(qoco.spans, true).blocked_edges.size() == 8);
}

TEST_CASE("pruning a QO prompt is a vacuous intervention") {
    Vocabulary vocab(10, 10);
    auto corpus = gen_corpus(corpus_config());
    Model model = small_decoder(vocab.size());
    TokenizedPrompt qo = render(vocab, corpus[0], Ordering::QO, ArchFlavor::Decoder);
    CHECK(derive_prune_spec(qo.spans).blocked_edges.empty());
    OptionDistribution plain = score_options(model, qo);
    OptionDistribution pruned = prune_and_score(model, qo);
    for (int i = 0; i < 4; ++i) {
        CHECK(pruned.logits[static_cast<size_t>(i)] == plain.logits[static_cast<size_t>(i)]);
        CHECK(pruned.probs[static_cast<size_t>(i)] == plain.probs[static_cast<size_t>(i)]);
    }
}

TEST_CASE("pruned option queries place exactly zero attention on context keys") {
    Vocabulary vocab(10, 10);
    auto corpus = gen_corpus(corpus_config());
    Model model = small_decoder(vocab.size());
    TokenizedPrompt cqo = render(vocab, corpus[1], Ordering::CQO, ArchFlavor::Decoder);
    PruneSpec spec = derive_prune_spec(cqo.spans);
    MaskPolicy policy{MaskBase::Causal, spec.blocked_edges};
    ForwardOptions opts;
    opts.capture_trace = true;
    ForwardResult r = forward(model.stack, cqo.tokens, policy, opts);
    for (size_t l = 0; l < r.trace->n_layers; ++l)
        for (size_t h = 0; h < r.trace->n_heads; ++h)
            for (const Span& opt : cqo.spans.option_spans)
                for (size_t q = opt.begin; q < opt.end; ++q)
                    for (size_t k = cqo.spans.context.begin; k < cqo.spans.context.end; ++k)
                        REQUIRE(r.trace->attn(l, h, q, k) == 0.0);
}

TEST_CASE("empty layer range patching equals plain scoring") {
    Vocabulary vocab(10, 10);
    auto corpus = gen_corpus(corpus_config());
    Model model = small_decoder(vocab.size());
    const Sample& s = corpus[2];
    TokenizedPrompt qoc = render(vocab, s, Ordering::QOC, ArchFlavor::Decoder);

    PatchDirective empty;
    empty.layer_range = Span{2, 2};  // empty interval
    OptionDistribution patched = score_options(model, qoc, nullptr, &empty);
    OptionDistribution plain = score_options(model, qoc);
    for (int i = 0; i < 4; ++i)
        CHECK(patched.logits[static_cast<size_t>(i)] == plain.logits[static_cast<size_t>(i)]);
}

TEST_CASE("self-patching QOC with its own trace is idempotent") {
    Vocabulary vocab(10, 10);
    auto corpus = gen_corpus(corpus_config());
    Model model = small_decoder(vocab.size());
    const Sample& s = corpus[3];
    TokenizedPrompt qoc = render(vocab, s, Ordering::QOC, ArchFlavor::Decoder);

    ForwardOptions trace_opts;
    trace_opts.capture_trace = true;
    ForwardResult plain = forward(model.stack, qoc.tokens, default_policy(model.config.arch),
                                  trace_opts);

    Span range = normalized_layer_range(model.config.n_layers);
    PatchDirective self;
    self.layer_range = range;
    for (const Span& opt : qoc.spans.option_spans)
        for (size_t p = opt.begin; p < opt.end; ++p) self.positions.push_back(p);
    for (size_t l = range.begin; l < range.end; ++l) {
        std::vector<std::vector<double>> per_layer;
        for (size_t p : self.positions) {
            const double* row = plain.trace->residual_row(l, p);
            per_layer.emplace_back(row, row + static_cast<size_t>(model.config.d_model));
        }
        self.replacement_states.push_back(std::move(per_layer));
    }
    ForwardOptions patch_opts;
    patch_opts.patch = &self;
    ForwardResult patched = forward(model.stack, qoc.tokens, default_policy(model.config.arch),
                                    patch_opts);
    CHECK(patched.logits->values == plain.logits->values);
}

TEST_CASE("patch locality: pre-range states at non-option positions are untouched") {
    Vocabulary vocab(10, 10);
    auto corpus = gen_corpus(corpus_config());
    Model model = small_decoder(vocab.size());
    const Sample& s = corpus[4];

    // A real cross-prompt patch: CQO states into QOC.
    PatchPlan plan = build_patch_plan(vocab, s, model.config.n_layers);
    ForwardOptions topts;
    topts.capture_trace = true;
    ForwardResult src = forward(model.stack, plan.source.tokens,
                                default_policy(model.config.arch), topts);
    PatchDirective directive;
    directive.layer_range = plan.layer_range;
    for (const auto& [sp, tp] : plan.aligned) directive.positions.push_back(tp);
    for (size_t l = plan.layer_range.begin; l < plan.layer_range.end; ++l) {
        std::vector<std::vector<double>> per_layer;
        for (const auto& [sp, tp] : plan.aligned) {
            const double* row = src.trace->residual_row(l, sp);
            per_layer.emplace_back(row, row + static_cast<size_t>(model.config.d_model));
        }
        directive.replacement_states.push_back(std::move(per_layer));
    }

    ForwardOptions plain_opts;
    plain_opts.capture_trace = true;
    ForwardResult plain = forward(model.stack, plan.target.tokens,
                                  default_policy(model.config.arch), plain_opts);
    ForwardOptions patched_opts;
    patched_opts.capture_trace = true;
    patched_opts.patch = &directive;
    ForwardResult patched = forward(model.stack, plan.target.tokens,
                                    default_policy(model.config.arch), patched_opts);

    for (size_t l = 0; l < plan.layer_range.begin; ++l)
        CHECK(patched.trace->residual[l] == plain.trace->residual[l]);
    // Inside the range, patched positions carry the source states.
    size_t first_patch_layer = plan.layer_range.begin;
    const size_t d = static_cast<size_t>(model.config.d_model);
    for (size_t i = 0; i < directive.positions.size(); ++i) {
        const double* got =
            patched.trace->residual_row(first_patch_layer, directive.positions[i]);
        for (size_t j = 0; j < d; ++j)
            CHECK(got[j] == directive.replacement_states[0][i][j]);
    }
}

TEST_CASE("patch_and_score and qoco_score run end to end on a random model") {
    Vocabulary vocab(10, 10);
    auto corpus = gen_corpus(corpus_config());
    Model model = small_decoder(vocab.size());
    OptionDistribution d1 = patch_and_score(model, vocab, corpus[5]);
    OptionDistribution d2 = qoco_score(model, vocab, corpus[5]);
    double s1 = 0, s2 = 0;
    for (int i = 0; i < 4; ++i) {
        s1 += d1.probs[static_cast<size_t>(i)];
        s2 += d2.probs[static_cast<size_t>(i)];
    }
    CHECK(s1 == doctest::Approx(1.0));
    CHECK(s2 == doctest::Approx(1.0));

    Model enc = small_decoder(vocab.size());
    enc.config.arch = Architecture::EncoderOnly;
    CHECK_THROWS_AS(patch_and_score(enc, vocab, corpus[5]), ProtocolError);
}
