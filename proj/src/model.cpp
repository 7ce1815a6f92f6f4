#include "ordlab/model.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "ordlab/hash.hpp"
#include "ordlab/rng.hpp"

namespace ordlab {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInitStd = 0.02;
}  // namespace

const char* architecture_name(Architecture a) {
    switch (a) {
        case Architecture::DecoderOnly: return "decoder_only";
        case Architecture::EncoderOnly: return "encoder_only";
        case Architecture::EncoderDecoder: return "encoder_decoder";
    }
    return "?";
}

Architecture architecture_from_name(const std::string& name) {
    if (name == "decoder_only") return Architecture::DecoderOnly;
    if (name == "encoder_only") return Architecture::EncoderOnly;
    if (name == "encoder_decoder") return Architecture::EncoderDecoder;
    throw ContractError("unknown architecture '" + name + "'");
}

void ModelConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 || vocab_size < 1 || max_seq < 1)
        throw ContractError("ModelConfig: all dimensions must be positive");
    if (d_model % n_heads != 0)
        throw ContractError("ModelConfig: d_model " + std::to_string(d_model) +
                            " not divisible by n_heads " + std::to_string(n_heads));
}

Tensor build_mask(const MaskPolicy& policy, size_t seq_len) {
    Tensor mask = tensor_zeros({seq_len, seq_len});
    if (policy.base == MaskBase::Causal) {
        for (size_t i = 0; i < seq_len; ++i)
            for (size_t j = i + 1; j < seq_len; ++j) mask->values[i * seq_len + j] = kNegInf;
    }
    for (const auto& [qspan, kspan] : policy.blocked_edges) {
        if (qspan.end > seq_len || kspan.end > seq_len)
            throw ContractError("build_mask: blocked edge span exceeds seq_len " +
                                std::to_string(seq_len));
        for (size_t i = qspan.begin; i < qspan.end; ++i)
            for (size_t j = kspan.begin; j < kspan.end; ++j)
                mask->values[i * seq_len + j] = kNegInf;
    }
    return mask;
}

namespace {

Tensor init_normal(Rng& rng, std::vector<size_t> shape) {
    Tensor t = tensor_zeros(std::move(shape), true);
    for (double& v : t->values) v = rng.normal(0.0, kInitStd);
    return t;
}

Tensor init_const(std::vector<size_t> shape, double value) {
    Tensor t = tensor_full(std::move(shape), value, true);
    return t;
}

}  // namespace

Parameters init_params(const ModelConfig& config, StackRole role,
                       std::optional<uint64_t> seed_override) {
    config.validate();
    Parameters p;
    p.config = config;
    p.has_cross = role == StackRole::WithCrossAttention;
    const size_t d = static_cast<size_t>(config.d_model);
    const size_t ff = static_cast<size_t>(config.d_ff);
    Rng rng(seed_override.value_or(config.seed));

    p.tok_emb = init_normal(rng, {static_cast<size_t>(config.vocab_size), d});
    p.pos_emb = init_normal(rng, {static_cast<size_t>(config.max_seq), d});
    for (int l = 0; l < config.n_layers; ++l) {
        LayerParams lp;
        lp.ln1_g = init_const({d}, 1.0);
        lp.ln1_b = init_const({d}, 0.0);
        lp.wq = init_normal(rng, {d, d});
        lp.wk = init_normal(rng, {d, d});
        lp.wv = init_normal(rng, {d, d});
        lp.wo = init_normal(rng, {d, d});
        if (p.has_cross) {
            lp.lnx_g = init_const({d}, 1.0);
            lp.lnx_b = init_const({d}, 0.0);
            lp.xwq = init_normal(rng, {d, d});
            lp.xwk = init_normal(rng, {d, d});
            lp.xwv = init_normal(rng, {d, d});
            lp.xwo = init_normal(rng, {d, d});
        }
        lp.ln2_g = init_const({d}, 1.0);
        lp.ln2_b = init_const({d}, 0.0);
        lp.w1 = init_normal(rng, {d, ff});
        lp.b1 = init_const({ff}, 0.0);
        lp.w2 = init_normal(rng, {ff, d});
        lp.b2 = init_const({d}, 0.0);
        p.layers.push_back(std::move(lp));
    }
    p.final_ln_g = init_const({d}, 1.0);
    p.final_ln_b = init_const({d}, 0.0);
    return p;
}

std::vector<std::pair<std::string, Tensor>> named_tensors(const Parameters& params,
                                                          const std::string& prefix) {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back(prefix + "tok_emb", params.tok_emb);
    out.emplace_back(prefix + "pos_emb", params.pos_emb);
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const LayerParams& lp = params.layers[l];
        std::string base = prefix + "layer" + std::to_string(l) + ".";
        out.emplace_back(base + "ln1_g", lp.ln1_g);
        out.emplace_back(base + "ln1_b", lp.ln1_b);
        out.emplace_back(base + "wq", lp.wq);
        out.emplace_back(base + "wk", lp.wk);
        out.emplace_back(base + "wv", lp.wv);
        out.emplace_back(base + "wo", lp.wo);
        if (params.has_cross) {
            out.emplace_back(base + "lnx_g", lp.lnx_g);
            out.emplace_back(base + "lnx_b", lp.lnx_b);
            out.emplace_back(base + "xwq", lp.xwq);
            out.emplace_back(base + "xwk", lp.xwk);
            out.emplace_back(base + "xwv", lp.xwv);
            out.emplace_back(base + "xwo", lp.xwo);
        }
        out.emplace_back(base + "ln2_g", lp.ln2_g);
        out.emplace_back(base + "ln2_b", lp.ln2_b);
        out.emplace_back(base + "w1", lp.w1);
        out.emplace_back(base + "b1", lp.b1);
        out.emplace_back(base + "w2", lp.w2);
        out.emplace_back(base + "b2", lp.b2);
    }
    out.emplace_back(prefix + "final_ln_g", params.final_ln_g);
    out.emplace_back(prefix + "final_ln_b", params.final_ln_b);
    return out;
}

size_t param_count(const Parameters& params) {
    size_t n = 0;
    for (const auto& [name, t] : named_tensors(params)) n += t->size();
    return n;
}

Model init_model(const ModelConfig& config) {
    config.validate();
    Model m;
    m.config = config;
    if (config.arch == Architecture::EncoderDecoder) {
        m.stack = init_params(config, StackRole::SelfAttentionOnly, config.seed);
        // Decoder stack gets its own derived stream.
        m.decoder_stack = init_params(config, StackRole::WithCrossAttention,
                                      Rng(config.seed).derive(1).seed());
    } else {
        m.stack = init_params(config);
    }
    return m;
}

std::vector<std::pair<std::string, Tensor>> named_tensors(const Model& model) {
    std::string prefix = model.decoder_stack ? "enc." : "";
    auto out = named_tensors(model.stack, prefix);
    if (model.decoder_stack) {
        auto dec = named_tensors(*model.decoder_stack, "dec.");
        out.insert(out.end(), dec.begin(), dec.end());
    }
    return out;
}

Model clone_model(const Model& model) {
    Model copy;
    copy.config = model.config;
    auto clone_stack = [](const Parameters& src) {
        Parameters dst = src;  // copies tensor handles; now deep-copy each
        auto deep = [](Tensor& t) {
            if (!t) return;
            auto fresh = std::make_shared<TensorData>(*t);
            fresh->grad.clear();
            t = fresh;
        };
        deep(dst.tok_emb);
        deep(dst.pos_emb);
        for (LayerParams& lp : dst.layers) {
            deep(lp.ln1_g); deep(lp.ln1_b);
            deep(lp.wq); deep(lp.wk); deep(lp.wv); deep(lp.wo);
            deep(lp.lnx_g); deep(lp.lnx_b);
            deep(lp.xwq); deep(lp.xwk); deep(lp.xwv); deep(lp.xwo);
            deep(lp.ln2_g); deep(lp.ln2_b);
            deep(lp.w1); deep(lp.b1); deep(lp.w2); deep(lp.b2);
        }
        deep(dst.final_ln_g);
        deep(dst.final_ln_b);
        return dst;
    };
    copy.stack = clone_stack(model.stack);
    if (model.decoder_stack) copy.decoder_stack = clone_stack(*model.decoder_stack);
    return copy;
}

uint64_t model_fingerprint(const Model& model) {
    uint64_t h = 0xcbf29ce484222325ull;
    std::string cfg = std::string(architecture_name(model.config.arch)) + "," +
                      std::to_string(model.config.n_layers) + "," +
                      std::to_string(model.config.n_heads) + "," +
                      std::to_string(model.config.d_model) + "," +
                      std::to_string(model.config.d_ff) + "," +
                      std::to_string(model.config.vocab_size) + "," +
                      std::to_string(model.config.max_seq);
    h = fnv1a64(cfg.data(), cfg.size(), h);
    for (const auto& [name, t] : named_tensors(model)) {
        h = fnv1a64(name.data(), name.size(), h);
        h = fnv1a64(t->values.data(), t->values.size() * sizeof(double), h);
    }
    return h;
}

void zero_grads(Model& model) {
    for (auto& [name, t] : named_tensors(model)) t->zero_grad();
}

void set_requires_grad(Model& model, bool requires_grad) {
    for (auto& [name, t] : named_tensors(model)) t->requires_grad = requires_grad;
}

MaskPolicy default_policy(Architecture arch) {
    MaskPolicy p;
    p.base = arch == Architecture::EncoderOnly ? MaskBase::Bidirectional : MaskBase::Causal;
    return p;
}

// ---- forward ----------------------------------------------------------------

namespace {

struct StackState {
    Tensor hidden;       // final layer-norm output [seq x d]
    Tensor tok_emb_rows; // gathered token embeddings
    LayerTrace trace;
};

void validate_patch(const PatchDirective& patch, size_t seq, int n_layers, size_t d_model) {
    if (patch.layer_range.end > static_cast<size_t>(n_layers))
        throw ContractError("patch: layer_range exceeds model depth");
    for (size_t i = 0; i < patch.positions.size(); ++i) {
        if (patch.positions[i] >= seq) throw ContractError("patch: position exceeds sequence");
        if (i > 0 && patch.positions[i] <= patch.positions[i - 1])
            throw ContractError("patch: positions must be strictly increasing");
    }
    if (!patch.layer_range.empty()) {
        if (patch.replacement_states.size() != patch.layer_range.size())
            throw ContractError("patch: one replacement set per layer in layer_range required");
        for (const auto& per_layer : patch.replacement_states) {
            if (per_layer.size() != patch.positions.size())
                throw ContractError("patch: replacement count must match positions");
            for (const auto& vec : per_layer)
                if (vec.size() != d_model)
                    throw ContractError("patch: replacement width must equal d_model");
        }
    }
}

// Pre-norm transformer stack. `memory` enables cross-attention (encoder-decoder).
StackState run_stack(const Parameters& params, const std::vector<int>& tokens,
                     const MaskPolicy& policy, const ForwardOptions& opts,
                     const Tensor& memory = nullptr) {
    const ModelConfig& cfg = params.config;
    const size_t seq = tokens.size();
    if (seq == 0) throw ContractError("forward: empty token sequence");
    if (seq > static_cast<size_t>(cfg.max_seq))
        throw LengthError("forward: sequence length " + std::to_string(seq) + " exceeds max_seq " +
                          std::to_string(cfg.max_seq));
    if (params.has_cross && !memory)
        throw ContractError("forward: cross-attention stack needs encoder memory");
    if (opts.patch) validate_patch(*opts.patch, seq, cfg.n_layers, static_cast<size_t>(cfg.d_model));

    Tape* tape = opts.tape;
    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t heads = static_cast<size_t>(cfg.n_heads);
    const size_t hd = d / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));

    StackState st;
    st.trace.n_layers = static_cast<size_t>(cfg.n_layers);
    st.trace.n_heads = heads;
    st.trace.seq = seq;
    st.trace.d_model = d;

    Tensor mask = build_mask(policy, seq);

    st.tok_emb_rows = gather_rows(tape, params.tok_emb, tokens);
    Tensor pos = slice_rows(tape, params.pos_emb, 0, seq);
    Tensor x = add(tape, st.tok_emb_rows, pos);

    for (int l = 0; l < cfg.n_layers; ++l) {
        const LayerParams& lp = params.layers[static_cast<size_t>(l)];

        // self-attention
        Tensor h = layer_norm(tape, x, lp.ln1_g, lp.ln1_b);
        Tensor q = matmul(tape, h, lp.wq);
        Tensor k = matmul(tape, h, lp.wk);
        Tensor v = matmul(tape, h, lp.wv);
        std::vector<Tensor> head_outs;
        std::vector<double> attn_snapshot;
        if (opts.capture_trace) attn_snapshot.reserve(heads * seq * seq);
        for (size_t hh = 0; hh < heads; ++hh) {
            Tensor qh = slice_cols(tape, q, hh * hd, (hh + 1) * hd);
            Tensor kh = slice_cols(tape, k, hh * hd, (hh + 1) * hd);
            Tensor vh = slice_cols(tape, v, hh * hd, (hh + 1) * hd);
            Tensor scores = scale(tape, matmul_nt(tape, qh, kh), att_scale);
            Tensor a = masked_softmax(tape, scores, mask);
            if (opts.capture_trace)
                attn_snapshot.insert(attn_snapshot.end(), a->values.begin(), a->values.end());
            head_outs.push_back(matmul(tape, a, vh));
        }
        Tensor attn_out = matmul(tape, concat_cols(tape, head_outs), lp.wo);
        x = add(tape, x, attn_out);

        // cross-attention to encoder memory
        if (params.has_cross) {
            Tensor hx = layer_norm(tape, x, lp.lnx_g, lp.lnx_b);
            Tensor qx = matmul(tape, hx, lp.xwq);
            Tensor kx = matmul(tape, memory, lp.xwk);
            Tensor vx = matmul(tape, memory, lp.xwv);
            std::vector<Tensor> xhead_outs;
            for (size_t hh = 0; hh < heads; ++hh) {
                Tensor qxh = slice_cols(tape, qx, hh * hd, (hh + 1) * hd);
                Tensor kxh = slice_cols(tape, kx, hh * hd, (hh + 1) * hd);
                Tensor vxh = slice_cols(tape, vx, hh * hd, (hh + 1) * hd);
                Tensor scores = scale(tape, matmul_nt(tape, qxh, kxh), att_scale);
                Tensor a = masked_softmax(tape, scores, nullptr);
                xhead_outs.push_back(matmul(tape, a, vxh));
            }
            Tensor cross_out = matmul(tape, concat_cols(tape, xhead_outs), lp.xwo);
            x = add(tape, x, cross_out);
        }

        // feed-forward
        Tensor h2 = layer_norm(tape, x, lp.ln2_g, lp.ln2_b);
        Tensor f = add_rowvec(tape, matmul(tape, h2, lp.w1), lp.b1);
        f = gelu(tape, f);
        f = add_rowvec(tape, matmul(tape, f, lp.w2), lp.b2);
        x = add(tape, x, f);

        // activation patching: overwrite residual rows at layer exit
        if (opts.patch && opts.patch->layer_range.contains(static_cast<size_t>(l))) {
            const auto& states =
                opts.patch->replacement_states[static_cast<size_t>(l) -
                                               opts.patch->layer_range.begin];
            x = row_overwrite(tape, x, opts.patch->positions, states);
        }

        if (opts.capture_trace) {
            st.trace.attention.push_back(std::move(attn_snapshot));
            st.trace.residual.push_back(x->values);  // post-patch by design
        }
    }

    st.hidden = layer_norm(tape, x, params.final_ln_g, params.final_ln_b);
    return st;
}

Tensor logits_from_hidden(Tape* tape, const Parameters& params, const Tensor& hidden) {
    // Output projection is weight-tied to the token embedding.
    Tensor logits = matmul_nt(tape, hidden, params.tok_emb);
    if (!all_finite(*logits))
        throw NumericError("forward: non-finite logits");
    return logits;
}

}  // namespace

ForwardResult forward(const Parameters& params, const std::vector<int>& tokens,
                      const MaskPolicy& policy, const ForwardOptions& opts) {
    StackState st = run_stack(params, tokens, policy, opts);
    ForwardResult out;
    out.logits = logits_from_hidden(opts.tape, params, st.hidden);
    out.tok_embeddings = st.tok_emb_rows;
    if (opts.capture_trace) out.trace = std::move(st.trace);
    return out;
}

ForwardResult forward_encdec(const Parameters& enc, const Parameters& dec,
                             const std::vector<int>& src_tokens,
                             const std::vector<int>& tgt_tokens, const ForwardOptions& opts) {
    if (enc.has_cross) throw ContractError("forward_encdec: encoder stack must be self-only");
    if (!dec.has_cross) throw ContractError("forward_encdec: decoder stack lacks cross-attention");
    ForwardOptions enc_opts;
    enc_opts.tape = opts.tape;
    MaskPolicy enc_policy{MaskBase::Bidirectional, {}};
    StackState enc_state = run_stack(enc, src_tokens, enc_policy, enc_opts);

    ForwardOptions dec_opts = opts;
    MaskPolicy dec_policy{MaskBase::Causal, {}};
    StackState dec_state = run_stack(dec, tgt_tokens, dec_policy, dec_opts, enc_state.hidden);

    ForwardResult out;
    out.logits = logits_from_hidden(opts.tape, dec, dec_state.hidden);
    out.tok_embeddings = enc_state.tok_emb_rows;
    if (opts.capture_trace) out.trace = std::move(dec_state.trace);
    return out;
}

}  // namespace ordlab
