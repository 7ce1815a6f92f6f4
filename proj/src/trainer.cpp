#include "ordlab/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "ordlab/rng.hpp"

namespace ordlab {

const char* lr_schedule_name(LrSchedule s) {
    return s == LrSchedule::Constant ? "constant" : "linear_warmup_decay";
}

LrSchedule lr_schedule_from_name(const std::string& name) {
    if (name == "constant") return LrSchedule::Constant;
    if (name == "linear_warmup_decay") return LrSchedule::LinearWarmupDecay;
    throw ContractError("unknown lr schedule '" + name + "'");
}

void TrainConfig::validate() const {
    if (mix_cqo < 0.0 || mix_qoc < 0.0 || mix_cqo + mix_qoc <= 0.0)
        throw ContractError("TrainConfig: ordering mix weights must be nonnegative, sum > 0");
    if (batch_size == 0) throw ContractError("TrainConfig: batch_size must be positive");
    if (learning_rate <= 0.0) throw ContractError("TrainConfig: learning_rate must be positive");
    if (grad_clip <= 0.0) throw ContractError("TrainConfig: grad_clip must be positive");
    if (eval_every == 0) throw ContractError("TrainConfig: eval_every must be positive");
    if (aux_lm_weight < 0.0) throw ContractError("TrainConfig: aux_lm_weight must be nonnegative");
}

AdamState make_adam_state(const Model& model) {
    AdamState st;
    for (const auto& [name, t] : named_tensors(model)) {
        st.m.emplace_back(t->size(), 0.0);
        st.v.emplace_back(t->size(), 0.0);
    }
    return st;
}

double adam_step(Model& model, AdamState& state, double lr, double grad_clip) {
    auto tensors = named_tensors(model);
    // Global L2 gradient clipping first.
    double sq = 0.0;
    for (auto& [name, t] : tensors) {
        if (t->grad.empty()) continue;
        for (double g : t->grad) sq += g * g;
    }
    double norm = std::sqrt(sq);
    double gscale = norm > grad_clip ? grad_clip / norm : 1.0;

    state.t++;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    const double step_cap = lr * grad_clip;
    double max_step = 0.0;
    for (size_t i = 0; i < tensors.size(); ++i) {
        TensorData& t = *tensors[i].second;
        if (t.grad.empty()) continue;
        std::vector<double>& m = state.m[i];
        std::vector<double>& v = state.v[i];
        for (size_t j = 0; j < t.values.size(); ++j) {
            double g = t.grad[j] * gscale;
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            double step = lr * mhat / (std::sqrt(vhat) + state.eps);
            step = std::clamp(step, -step_cap, step_cap);
            t.values[j] -= step;
            max_step = std::max(max_step, std::fabs(step));
        }
    }
    return max_step;
}

namespace {

double lr_at(const TrainConfig& cfg, size_t step) {
    if (cfg.lr_schedule == LrSchedule::Constant) return cfg.learning_rate;
    const double warmup = std::max(1.0, static_cast<double>(cfg.steps) / 10.0);
    const double s = static_cast<double>(step);
    if (s <= warmup) return cfg.learning_rate * s / warmup;
    const double total = static_cast<double>(cfg.steps);
    if (total <= warmup) return cfg.learning_rate;
    // Linear decay to a tenth of the peak at the final step.
    double frac = (total - s) / (total - warmup);
    return cfg.learning_rate * (0.1 + 0.9 * frac);
}

Tensor row_ce(Tape& tape, const Tensor& logits, size_t row, size_t target, size_t vocab_size) {
    Tensor picked = reshape(&tape, slice_rows(&tape, logits, row, row + 1), {vocab_size});
    return cross_entropy(&tape, picked, target);
}

// Gold-label cross-entropy at the protocol's scoring position, plus the
// auxiliary language-modeling term: next-token CE over the whole prompt for
// causal stacks, masked-token CE at corrupted positions for bidirectional
// ones (corruption rate 0.15, always replaced by the mask token).
Tensor sample_loss(Tape& tape, const Model& model, const Vocabulary& vocab, const Sample& s,
                   Ordering ordering, double aux_weight, Rng& rng) {
    ArchFlavor flavor = flavor_for(model.config.arch);
    TokenizedPrompt prompt =
        render(vocab, s, ordering, flavor, {}, static_cast<size_t>(model.config.max_seq));
    ForwardOptions opts;
    opts.tape = &tape;
    const size_t vocab_size = static_cast<size_t>(model.config.vocab_size);
    const size_t gold_token = static_cast<size_t>(vocab.label_token(s.answer_idx));
    constexpr double kMaskRate = 0.15;

    if (model.config.arch == Architecture::EncoderDecoder) {
        // Corrupt encoder positions for the auxiliary term; the encoder's
        // tied output head scores the reconstruction.
        std::vector<int> corrupted = prompt.tokens;
        std::vector<size_t> masked;
        if (aux_weight > 0.0) {
            for (size_t i = 0; i < corrupted.size(); ++i)
                if (rng.uniform() < kMaskRate) {
                    masked.push_back(i);
                    corrupted[i] = TOK_MASK;
                }
        }
        std::vector<int> tgt{TOK_BOS};
        ForwardOptions enc_opts;
        enc_opts.tape = &tape;
        ForwardResult r =
            forward_encdec(model.stack, *model.decoder_stack, corrupted, tgt, opts);
        Tensor loss = row_ce(tape, r.logits, 0, gold_token, vocab_size);
        if (!masked.empty()) {
            MaskPolicy bidir{MaskBase::Bidirectional, {}};
            ForwardResult enc_r = forward(model.stack, corrupted, bidir, enc_opts);
            Tensor aux = tensor_scalar(0.0);
            for (size_t pos : masked) {
                Tensor ce = row_ce(tape, enc_r.logits, pos,
                                   static_cast<size_t>(prompt.tokens[pos]), vocab_size);
                aux = add(&tape, aux, ce);
            }
            loss = add(&tape, loss,
                       scale(&tape, aux, aux_weight / static_cast<double>(masked.size())));
        }
        return loss;
    }

    if (flavor == ArchFlavor::EncoderCloze) {
        std::vector<int> corrupted = prompt.tokens;
        std::vector<size_t> masked;
        if (aux_weight > 0.0) {
            size_t cue_mask = scoring_row(prompt);
            for (size_t i = 0; i < corrupted.size(); ++i) {
                if (i == cue_mask) continue;
                if (rng.uniform() < kMaskRate) {
                    masked.push_back(i);
                    corrupted[i] = TOK_MASK;
                }
            }
        }
        ForwardResult r =
            forward(model.stack, corrupted, default_policy(model.config.arch), opts);
        Tensor loss = row_ce(tape, r.logits, scoring_row(prompt), gold_token, vocab_size);
        if (!masked.empty()) {
            Tensor aux = tensor_scalar(0.0);
            for (size_t pos : masked) {
                Tensor ce = row_ce(tape, r.logits, pos,
                                   static_cast<size_t>(prompt.tokens[pos]), vocab_size);
                aux = add(&tape, aux, ce);
            }
            loss = add(&tape, loss,
                       scale(&tape, aux, aux_weight / static_cast<double>(masked.size())));
        }
        return loss;
    }

    // Decoder: next-token LM over every position plus the label term.
    ForwardResult r = forward(model.stack, prompt.tokens, default_policy(model.config.arch), opts);
    Tensor loss = row_ce(tape, r.logits, scoring_row(prompt), gold_token, vocab_size);
    if (aux_weight > 0.0 && prompt.tokens.size() > 1) {
        const size_t n_pred = prompt.tokens.size() - 1;
        Tensor aux = tensor_scalar(0.0);
        for (size_t pos = 0; pos < n_pred; ++pos) {
            Tensor ce = row_ce(tape, r.logits, pos,
                               static_cast<size_t>(prompt.tokens[pos + 1]), vocab_size);
            aux = add(&tape, aux, ce);
        }
        loss = add(&tape, loss, scale(&tape, aux, aux_weight / static_cast<double>(n_pred)));
    }
    return loss;
}

double subset_accuracy(const Model& model, const std::vector<Sample>& corpus,
                       const std::vector<size_t>& ids, const Vocabulary& vocab,
                       Ordering ordering) {
    if (ids.empty()) return 0.0;
    ArchFlavor flavor = flavor_for(model.config.arch);
    size_t correct = 0;
    for (size_t id : ids) {
        const Sample& s = corpus[id];
        TokenizedPrompt prompt =
            render(vocab, s, ordering, flavor, {}, static_cast<size_t>(model.config.max_seq));
        if (score_options(model, prompt).predicted == s.answer_idx) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ids.size());
}

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& tcfg,
                  const std::vector<Sample>& corpus, const Vocabulary& vocab) {
    model_cfg.validate();
    tcfg.validate();
    if (corpus.empty()) throw ContractError("train: empty corpus");

    TrainResult result;
    for (size_t i = 0; i < corpus.size(); ++i)
        (is_heldout_id(i) ? result.heldout_ids : result.train_ids).push_back(i);
    if (result.train_ids.empty() || result.heldout_ids.empty())
        throw ContractError("train: corpus too small to split into train/held-out");
    // Disjointness by construction; verified cheaply here.
    for (size_t id : result.heldout_ids)
        if (!is_heldout_id(id)) throw ContractError("train: split overlap detected");

    std::vector<size_t> probe_ids(result.heldout_ids.begin(),
                                  result.heldout_ids.begin() +
                                      std::min<size_t>(result.heldout_ids.size(), 400));

    Model model = init_model(model_cfg);
    set_requires_grad(model, true);
    AdamState adam = make_adam_state(model);
    Rng rng(tcfg.seed);
    const double mix_total = tcfg.mix_cqo + tcfg.mix_qoc;

    Model best = clone_model(model);
    result.best_step = 0;
    result.best_acc_cqo = -1.0;

    double loss_acc = 0.0;
    size_t loss_count = 0;

    for (size_t step = 1; step <= tcfg.steps; ++step) {
        zero_grads(model);
        double batch_loss = 0.0;
        for (size_t b = 0; b < tcfg.batch_size; ++b) {
            size_t id = result.train_ids[rng.uniform_int(result.train_ids.size())];
            Ordering ordering =
                rng.uniform() * mix_total < tcfg.mix_cqo ? Ordering::CQO : Ordering::QOC;
            Tape tape;
            Tensor loss =
                sample_loss(tape, model, vocab, corpus[id], ordering, tcfg.aux_lm_weight, rng);
            double lv = loss->values[0];
            if (!std::isfinite(lv))
                throw TrainingError("train: non-finite loss at step " + std::to_string(step));
            batch_loss += lv;
            Tensor scaled = scale(&tape, loss, 1.0 / static_cast<double>(tcfg.batch_size));
            backward(scaled, tape);
        }
        batch_loss /= static_cast<double>(tcfg.batch_size);
        loss_acc += batch_loss;
        loss_count++;

        adam_step(model, adam, lr_at(tcfg, step), tcfg.grad_clip);

        if (step % tcfg.eval_every == 0 || step == tcfg.steps) {
            TrainLogRow row;
            row.step = step;
            row.loss = loss_acc / static_cast<double>(loss_count);
            loss_acc = 0.0;
            loss_count = 0;
            row.acc_cqo = subset_accuracy(model, corpus, probe_ids, vocab, Ordering::CQO);
            row.acc_qoc = subset_accuracy(model, corpus, probe_ids, vocab, Ordering::QOC);
            result.log.rows.push_back(row);
            if (row.acc_cqo > result.best_acc_cqo) {
                result.best_acc_cqo = row.acc_cqo;
                result.best_step = step;
                best = clone_model(model);
            }
        }
    }

    if (tcfg.steps == 0) {
        best = clone_model(model);
        result.best_step = 0;
        result.best_acc_cqo = 0.0;
    }
    set_requires_grad(best, false);
    result.model = std::move(best);
    return result;
}

Hypothesis1Result hypothesis1_probe(const Model& model, const std::vector<Sample>& corpus,
                                    const Vocabulary& vocab, uint64_t eval_seed, int workers) {
    Hypothesis1Result out;
    out.cqo = evaluate(model, corpus, vocab, Ordering::CQO, 0, eval_seed, workers);
    out.qoc = evaluate(model, corpus, vocab, Ordering::QOC, 0, eval_seed, workers);
    out.gap = performance_gap(out.cqo, out.qoc);
    return out;
}

}  // namespace ordlab
