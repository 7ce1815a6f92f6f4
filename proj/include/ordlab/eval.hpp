#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ordlab/corpus.hpp"
#include "ordlab/model.hpp"
#include "ordlab/prompt.hpp"

namespace ordlab {

// Constrained-likelihood distribution over the four answer labels.
struct OptionDistribution {
    std::array<double, 4> logits{};
    std::array<double, 4> probs{};
    int predicted = 0;  // argmax, ties broken toward the lower index
};

// Restricts a full-vocabulary logits row to the label tokens A..D and
// softmax-normalizes. `row` has vocab_size entries.
OptionDistribution restrict_to_labels(const double* row, size_t vocab_size);

// Scores a prompt under the architecture's protocol:
//   decoder  -> next-token logits at the last cue token;
//   cloze    -> logits at the mask position;
//   encdec   -> decoder logits at position 0 given tgt = [<s>].
// policy_override replaces the architecture's default mask policy (used by
// attention pruning); patch applies an activation-patching directive.
OptionDistribution score_options(const Model& model, const TokenizedPrompt& prompt,
                                 const MaskPolicy* policy_override = nullptr,
                                 const PatchDirective* patch = nullptr);

struct BucketStat {
    size_t n = 0;
    size_t correct = 0;
};

// Evaluation of one (ordering, fewshot_k) condition over a corpus.
struct EvalReport {
    int schema_version = 1;
    Ordering ordering = Ordering::CQO;
    int fewshot_k = 0;
    size_t n = 0;
    size_t correct = 0;
    double accuracy = 0.0;
    std::array<BucketStat, 4> by_position;        // answer label A..D
    std::map<int, BucketStat> by_context_length;  // n_facts bucket
    uint64_t model_fp = 0;
    uint64_t corpus_fp = 0;
    std::vector<uint8_t> per_sample_correct;  // corpus order; for paired tests
};

using SampleScorer = std::function<OptionDistribution(const Sample&, const TokenizedPrompt&)>;

// Core evaluation loop; `evaluate` binds it to a model. Few-shot
// demonstrations are drawn from a content-sorted pool so the report is
// invariant to corpus permutation.
EvalReport evaluate_with_scorer(const std::vector<Sample>& corpus, const Vocabulary& vocab,
                                Ordering ordering, int fewshot_k, ArchFlavor flavor,
                                const SampleScorer& scorer, uint64_t eval_seed, int workers = 1);

EvalReport evaluate(const Model& model, const std::vector<Sample>& corpus, const Vocabulary& vocab,
                    Ordering ordering, int fewshot_k, uint64_t eval_seed, int workers = 1);

// Plain difference of accuracies (same units in, same units out). Reports
// with different model or corpus fingerprints cannot be compared.
double performance_gap(const EvalReport& cqo, const EvalReport& qoc);

ArchFlavor flavor_for(Architecture arch);

// Greedy next-token function; recall probing decodes through this.
using NextTokenFn = std::function<int(const std::vector<int>& tokens)>;

// Appends the recall cue "Option <label> :", greedily decodes exactly
// span-length tokens and reports an exact id match against the option span.
bool recall_probe_with(const TokenizedPrompt& prompt, int option_index,
                       const NextTokenFn& next_token);
bool recall_probe(const Model& model, const TokenizedPrompt& prompt, int option_index);

struct StratumGap {
    std::string stratum;  // "A".."D" or the n_facts bucket as text
    size_t n_cqo = 0;
    size_t n_qoc = 0;
    double gap_points = 0.0;  // percentage points, paper convention
    bool defined = false;     // false when a stratum is empty on either side
};

struct StratifiedGaps {
    std::vector<StratumGap> by_position;
    std::vector<StratumGap> by_context_length;
};

StratifiedGaps stratified_gaps(const EvalReport& cqo, const EvalReport& qoc);

// Flat key-value text record (one "key=value" per line).
std::string report_to_kv(const EvalReport& report);

}  // namespace ordlab
