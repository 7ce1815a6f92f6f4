#include "ordlab/analysis.hpp"

#include <cmath>

namespace ordlab {

const char* query_set_name(QuerySet q) {
    return q == QuerySet::CueOnly ? "cue_only" : "all_post_option";
}

AttentionProfile attention_profile(const LayerTrace& trace, const SpanMap& spans,
                                   QuerySet query_set) {
    AttentionProfile profile;
    profile.query_set = query_set;

    std::vector<Span> option_spans = spans.option_spans;
    for (const Span& s : spans.repeated_option_spans) option_spans.push_back(s);

    size_t q_begin = 0, q_end = 0;
    if (query_set == QuerySet::CueOnly) {
        q_begin = spans.cue.begin;
        q_end = spans.cue.end;
    } else {
        for (const Span& s : option_spans) q_begin = std::max(q_begin, s.end);
        q_end = trace.seq;
    }
    if (q_begin >= q_end) throw ContractError("attention_profile: empty query set");
    if (q_end > trace.seq) throw ContractError("attention_profile: spans exceed trace length");

    for (size_t l = 0; l < trace.n_layers; ++l) {
        double acc = 0.0;
        for (size_t h = 0; h < trace.n_heads; ++h) {
            for (size_t q = q_begin; q < q_end; ++q) {
                double row_mass = 0.0;
                for (const Span& s : option_spans)
                    for (size_t k = s.begin; k < s.end; ++k) row_mass += trace.attn(l, h, q, k);
                acc += row_mass;
            }
        }
        profile.per_layer.push_back(acc / (static_cast<double>(trace.n_heads) *
                                           static_cast<double>(q_end - q_begin)));
    }
    return profile;
}

AttributionReport attribution_from_scores(const std::vector<double>& per_token_scores,
                                          const SpanMap& spans, bool signed_aggregation) {
    AttributionReport rep;
    rep.per_token = per_token_scores;
    auto mass = [&](double v) { return signed_aggregation ? v : std::fabs(v); };
    double total = 0.0, context = 0.0;
    for (size_t i = 0; i < per_token_scores.size(); ++i) {
        double m = mass(per_token_scores[i]);
        total += m;
        if (spans.context.contains(i)) context += m;
    }
    rep.total_mass = total;
    if (total == 0.0) {
        rep.degenerate = true;
        rep.context_ratio = 0.0;
    } else {
        rep.context_ratio = context / total;
    }
    return rep;
}

AttributionReport grad_x_input(const Model& model, const TokenizedPrompt& prompt,
                               AttributionTarget target_mode, int gold_label,
                               bool signed_aggregation) {
    if (model.config.arch == Architecture::EncoderDecoder)
        throw ProtocolError("grad_x_input: decoder or encoder models only");
    if (prompt.flavor != flavor_for(model.config.arch))
        throw ProtocolError("grad_x_input: prompt flavor mismatch");
    if (gold_label < 0 || gold_label > 3) throw IndexError("grad_x_input: label out of range");

    int target = gold_label;
    if (target_mode == AttributionTarget::Predicted)
        target = score_options(model, prompt).predicted;

    Tape tape;
    ForwardOptions opts;
    opts.tape = &tape;
    ForwardResult r = forward(model.stack, prompt.tokens, default_policy(model.config.arch), opts);
    if (!r.tok_embeddings->requires_grad)
        throw ContractError("grad_x_input: model parameters carry no gradient");

    const size_t row = scoring_row(prompt);
    Tensor logits_row = slice_rows(&tape, r.logits, row, row + 1);
    Tensor restricted = gather_cols(&tape, logits_row, {TOK_A, TOK_B, TOK_C, TOK_D});
    Tensor flat = reshape(&tape, restricted, {4});
    Tensor loss = cross_entropy(&tape, flat, static_cast<size_t>(target));
    backward(loss, tape);

    // loss = -log p(target), so d(log p)/d(emb) = -grad.
    const size_t d = static_cast<size_t>(model.config.d_model);
    std::vector<double> scores(prompt.tokens.size(), 0.0);
    const TensorData& emb = *r.tok_embeddings;
    for (size_t i = 0; i < prompt.tokens.size(); ++i) {
        double dot = 0.0;
        for (size_t j = 0; j < d; ++j) dot += emb.values[i * d + j] * emb.grad[i * d + j];
        scores[i] = -dot;
    }
    AttributionReport rep = attribution_from_scores(scores, prompt.spans, signed_aggregation);
    rep.ordering = prompt.ordering;
    rep.target_label = target;
    return rep;
}

}  // namespace ordlab
