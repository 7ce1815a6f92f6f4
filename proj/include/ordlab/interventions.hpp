#pragma once

#include "ordlab/eval.hpp"
#include "ordlab/model.hpp"
#include "ordlab/prompt.hpp"

namespace ordlab {

// Derived option->context attention blocks for a prompt. By default only the
// original options block is pruned; for QOCO the repeated block is the
// intended open pathway.
struct PruneSpec {
    std::vector<std::pair<Span, Span>> blocked_edges;
};

PruneSpec derive_prune_spec(const SpanMap& spans, bool include_repeated_block = false);

// Middle-to-late half of the network: [ceil(n_layers / 2), n_layers).
// 24 layers -> [12, 24), i.e. layers 12..23.
Span normalized_layer_range(int n_layers);

// Scores a decoder prompt under Causal + blocked option->context edges.
// A prompt without a context span (QO) degenerates to plain scoring.
OptionDistribution prune_and_score(const Model& model, const TokenizedPrompt& prompt);

// CQO option hidden states patched into the QOC run at aligned positions over
// the middle-to-late layers, then scored.
struct PatchPlan {
    TokenizedPrompt source;  // CQO
    TokenizedPrompt target;  // QOC
    std::vector<std::pair<size_t, size_t>> aligned;  // (source pos, target pos)
    Span layer_range;
};

PatchPlan build_patch_plan(const Vocabulary& vocab, const Sample& sample, int n_layers);
OptionDistribution patch_and_score(const Model& model, const Vocabulary& vocab,
                                   const Sample& sample);

// Prompt-level intervention: repeat the options after the context (QOCO) and
// score; the cue follows the repeated options.
OptionDistribution qoco_score(const Model& model, const Vocabulary& vocab, const Sample& sample);

}  // namespace ordlab
