#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ordlab/corpus.hpp"
#include "ordlab/eval.hpp"
#include "ordlab/model.hpp"

namespace ordlab {

enum class LrSchedule { Constant, LinearWarmupDecay };

const char* lr_schedule_name(LrSchedule s);
LrSchedule lr_schedule_from_name(const std::string& name);

struct TrainConfig {
    // Weights over {CQO, QOC} for training prompts (normalized internally).
    double mix_cqo = 1.0;
    double mix_qoc = 0.0;
    size_t steps = 1000;
    size_t batch_size = 32;
    double learning_rate = 1e-3;
    LrSchedule lr_schedule = LrSchedule::LinearWarmupDecay;
    double grad_clip = 1.0;
    size_t eval_every = 100;
    uint64_t seed = 0;
    // Auxiliary language-modeling weight. The gold-label cross-entropy alone
    // is too sparse a signal for from-scratch miniature models; the usual
    // dense pretraining term (next-token CE for causal stacks, masked-token
    // CE for bidirectional ones) makes the retrieval circuits trainable.
    // 0 disables.
    double aux_lm_weight = 1.0;

    void validate() const;
};

struct TrainLogRow {
    size_t step = 0;
    double loss = 0.0;     // trailing mean training loss since last eval point
    double acc_cqo = 0.0;  // held-out probe subset
    double acc_qoc = 0.0;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
};

struct TrainResult {
    Model model;  // best held-out-CQO checkpoint
    TrainLog log;
    size_t best_step = 0;
    double best_acc_cqo = 0.0;
    std::vector<size_t> train_ids, heldout_ids;
};

// Adam with bias correction. Exposed for the update-bound unit test; the
// elementwise step is clamped to +/- lr * grad_clip so no parameter moves
// farther than that per step.
struct AdamState {
    std::vector<std::vector<double>> m, v;
    size_t t = 0;
    double beta1 = 0.9, beta2 = 0.99, eps = 1e-8;
};

AdamState make_adam_state(const Model& model);

// Applies one update from the gradients currently on the model parameters.
// Returns the largest absolute parameter change.
double adam_step(Model& model, AdamState& state, double lr, double grad_clip);

// Fits a model on the corpus's training split (sample ids with id % 5 != 4).
// The loss is the cross-entropy of the gold label token at the scoring
// position. Deterministic given seeds; returns the best checkpoint by
// held-out CQO accuracy on a fixed probe subset (first min(400, |held-out|)
// held-out samples).
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& tcfg,
                  const std::vector<Sample>& corpus, const Vocabulary& vocab);

struct Hypothesis1Result {
    EvalReport cqo;
    EvalReport qoc;
    double gap = 0.0;
};

// Evaluates both orderings on the given corpus: does ordering familiarity
// during training close the gap?
Hypothesis1Result hypothesis1_probe(const Model& model, const std::vector<Sample>& corpus,
                                    const Vocabulary& vocab, uint64_t eval_seed, int workers = 1);

}  // namespace ordlab
