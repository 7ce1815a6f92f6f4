#include "ordlab/interventions.hpp"

namespace ordlab {

PruneSpec derive_prune_spec(const SpanMap& spans, bool include_repeated_block) {
    PruneSpec spec;
    if (spans.context.empty()) return spec;  // nothing to block (QO)
    for (const Span& opt : spans.option_spans) spec.blocked_edges.emplace_back(opt, spans.context);
    if (include_repeated_block)
        for (const Span& opt : spans.repeated_option_spans)
            spec.blocked_edges.emplace_back(opt, spans.context);
    return spec;
}

Span normalized_layer_range(int n_layers) {
    if (n_layers < 2)
        throw ContractError("normalized_layer_range: need at least 2 layers, got " +
                            std::to_string(n_layers));
    size_t begin = (static_cast<size_t>(n_layers) + 1) / 2;  // ceil(n/2)
    return Span{begin, static_cast<size_t>(n_layers)};
}

OptionDistribution prune_and_score(const Model& model, const TokenizedPrompt& prompt) {
    if (model.config.arch != Architecture::DecoderOnly)
        throw ProtocolError("prune_and_score: decoder-only models only");
    PruneSpec spec = derive_prune_spec(prompt.spans);
    MaskPolicy policy{MaskBase::Causal, spec.blocked_edges};
    return score_options(model, prompt, &policy);
}

PatchPlan build_patch_plan(const Vocabulary& vocab, const Sample& sample, int n_layers) {
    PatchPlan plan;
    plan.source = render(vocab, sample, Ordering::CQO, ArchFlavor::Decoder);
    plan.target = render(vocab, sample, Ordering::QOC, ArchFlavor::Decoder);
    plan.aligned = align_option_spans(plan.source, plan.target);
    if (plan.aligned.empty()) throw ContractError("build_patch_plan: empty alignment");
    plan.layer_range = normalized_layer_range(n_layers);
    return plan;
}

OptionDistribution patch_and_score(const Model& model, const Vocabulary& vocab,
                                   const Sample& sample) {
    if (model.config.arch != Architecture::DecoderOnly)
        throw ProtocolError("patch_and_score: decoder-only models only");
    PatchPlan plan = build_patch_plan(vocab, sample, model.config.n_layers);

    // Clean source run: trace the unpatched CQO forward.
    ForwardOptions trace_opts;
    trace_opts.capture_trace = true;
    ForwardResult src = forward(model.stack, plan.source.tokens,
                                default_policy(model.config.arch), trace_opts);

    PatchDirective directive;
    directive.layer_range = plan.layer_range;
    for (const auto& [src_pos, tgt_pos] : plan.aligned) directive.positions.push_back(tgt_pos);
    const size_t d = static_cast<size_t>(model.config.d_model);
    for (size_t l = plan.layer_range.begin; l < plan.layer_range.end; ++l) {
        std::vector<std::vector<double>> per_layer;
        per_layer.reserve(plan.aligned.size());
        for (const auto& [src_pos, tgt_pos] : plan.aligned) {
            const double* row = src.trace->residual_row(l, src_pos);
            per_layer.emplace_back(row, row + d);
        }
        directive.replacement_states.push_back(std::move(per_layer));
    }
    return score_options(model, plan.target, nullptr, &directive);
}

OptionDistribution qoco_score(const Model& model, const Vocabulary& vocab, const Sample& sample) {
    if (model.config.arch != Architecture::DecoderOnly)
        throw ProtocolError("qoco_score: decoder-only models only");
    TokenizedPrompt prompt = render(vocab, sample, Ordering::QOCO, ArchFlavor::Decoder, {},
                                    static_cast<size_t>(model.config.max_seq));
    return score_options(model, prompt);
}

}  // namespace ordlab
