#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ordlab/span.hpp"
#include "ordlab/tensor.hpp"

namespace ordlab {

enum class Architecture { DecoderOnly, EncoderOnly, EncoderDecoder };

const char* architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& name);

struct ModelConfig {
    Architecture arch = Architecture::DecoderOnly;
    int n_layers = 2;
    int n_heads = 2;
    int d_model = 32;
    int d_ff = 64;
    int vocab_size = 64;
    int max_seq = 128;
    uint64_t seed = 0;

    void validate() const;
};

// Attention visibility rule applied uniformly to every layer of a stack.
enum class MaskBase { Causal, Bidirectional };

struct MaskPolicy {
    MaskBase base = MaskBase::Causal;
    // Every (i, j) with i in query_span and j in key_span becomes -inf.
    std::vector<std::pair<Span, Span>> blocked_edges;
};

// Additive [seq x seq] mask with entries in {0, -inf}. Spans out of bounds
// raise ContractError.
Tensor build_mask(const MaskPolicy& policy, size_t seq_len);

struct LayerParams {
    Tensor ln1_g, ln1_b;
    Tensor wq, wk, wv, wo;
    // Cross-attention block; present only on the decoder stack of an
    // encoder-decoder model.
    Tensor lnx_g, lnx_b;
    Tensor xwq, xwk, xwv, xwo;
    Tensor ln2_g, ln2_b;
    Tensor w1, b1, w2, b2;
};

// One transformer stack. The output projection is weight-tied to tok_emb.
struct Parameters {
    ModelConfig config;
    bool has_cross = false;
    Tensor tok_emb;  // [vocab_size x d_model]
    Tensor pos_emb;  // [max_seq x d_model]
    std::vector<LayerParams> layers;
    Tensor final_ln_g, final_ln_b;
};

enum class StackRole { SelfAttentionOnly, WithCrossAttention };

// Deterministic given (config, seed): weights ~ N(0, 0.02^2) drawn in the
// named-tensor order below, layer-norm gains 1, biases 0.
Parameters init_params(const ModelConfig& config, StackRole role = StackRole::SelfAttentionOnly,
                       std::optional<uint64_t> seed_override = std::nullopt);

// Fixed iteration order over a stack's tensors; checkpointing, the optimizer
// and gradient bookkeeping all key off this order.
std::vector<std::pair<std::string, Tensor>> named_tensors(const Parameters& params,
                                                          const std::string& prefix = "");

size_t param_count(const Parameters& params);

// A runnable model: one stack, plus a cross-attending decoder stack for the
// encoder-decoder architecture.
struct Model {
    ModelConfig config;
    Parameters stack;
    std::optional<Parameters> decoder_stack;
};

Model init_model(const ModelConfig& config);
std::vector<std::pair<std::string, Tensor>> named_tensors(const Model& model);
Model clone_model(const Model& model);
uint64_t model_fingerprint(const Model& model);
void zero_grads(Model& model);
void set_requires_grad(Model& model, bool requires_grad);

// Per-layer attention weights [n_heads x seq x seq] (flattened) and
// post-patch residual-stream states [seq x d_model].
struct LayerTrace {
    size_t n_layers = 0, n_heads = 0, seq = 0, d_model = 0;
    std::vector<std::vector<double>> attention;
    std::vector<std::vector<double>> residual;

    double attn(size_t layer, size_t head, size_t q, size_t k) const {
        return attention[layer][(head * seq + q) * seq + k];
    }
    const double* residual_row(size_t layer, size_t position) const {
        return residual[layer].data() + position * d_model;
    }
};

// Overwrites residual-stream rows at `positions` at the end of every layer in
// layer_range, before the next layer runs. replacement_states is indexed
// [layer - layer_range.begin][position index][d_model].
struct PatchDirective {
    std::vector<size_t> positions;  // strictly increasing
    Span layer_range;               // half-open layer interval
    std::vector<std::vector<std::vector<double>>> replacement_states;
};

struct ForwardOptions {
    Tape* tape = nullptr;
    bool capture_trace = false;
    const PatchDirective* patch = nullptr;
};

struct ForwardResult {
    Tensor logits;  // [seq x vocab]
    std::optional<LayerTrace> trace;
    // Gathered token embeddings [seq x d_model], before positions are added;
    // gradient target for Gradient x Input.
    Tensor tok_embeddings;
};

ForwardResult forward(const Parameters& params, const std::vector<int>& tokens,
                      const MaskPolicy& policy, const ForwardOptions& opts = {});

// Bidirectional encoder over src, causal decoder over tgt with cross-attention
// to the final encoder states. The returned trace (if requested) is the
// decoder stack's; tok_embeddings are the encoder's.
ForwardResult forward_encdec(const Parameters& enc, const Parameters& dec,
                             const std::vector<int>& src_tokens, const std::vector<int>& tgt_tokens,
                             const ForwardOptions& opts = {});

MaskPolicy default_policy(Architecture arch);

}  // namespace ordlab
