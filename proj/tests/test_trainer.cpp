#include <doctest.h>

#include <cmath>

#include "ordlab/checkpoint.hpp"
#include "ordlab/trainer.hpp"

using namespace ordlab;

namespace {

// Smallest valid task: 4 facts, 4 options, tiny alphabets. The corpus
// invariants require n_facts >= n_options, so this stands in for a
// "degenerate" retrieval task.
CorpusConfig smoke_corpus_config() {
    CorpusConfig c;
    c.n_samples = 3000;
    c.n_facts_choices = {4};
    c.n_keys = 4;
    c.n_values = 6;
    c.seed = 11;
    return c;
}

ModelConfig smoke_model_config(int vocab_size, Architecture arch = Architecture::DecoderOnly) {
    ModelConfig c;
    c.arch = arch;
    c.n_layers = 2;
    c.n_heads = 2;
    c.d_model = 32;
    c.d_ff = 64;
    c.vocab_size = vocab_size;
    c.max_seq = 64;
    c.seed = 1;
    return c;
}

TrainConfig smoke_train_config(size_t steps) {
    TrainConfig t;
    t.mix_cqo = 1.0;
    t.mix_qoc = 0.0;
    t.steps = steps;
    t.batch_size = 16;
    t.learning_rate = 1e-2;
    t.lr_schedule = LrSchedule::Constant;
    t.grad_clip = 1.0;
    t.eval_every = 50;
    t.seed = 3;
    return t;
}

}  // namespace

TEST_CASE("zero steps returns the initial parameters unchanged") {
    CorpusConfig cc = smoke_corpus_config();
    cc.n_samples = 100;
    Vocabulary vocab(cc.n_keys, cc.n_values);
    auto corpus = gen_corpus(cc);
    ModelConfig mc = smoke_model_config(vocab.size());
    TrainConfig tc = smoke_train_config(0);
    TrainResult r = train(mc, tc, corpus, vocab);
    CHECK(model_fingerprint(r.model) == model_fingerprint(init_model(mc)));
    CHECK(r.log.rows.empty());
    CHECK(r.best_step == 0);
}

TEST_CASE("identical seeds give bit-identical training logs and parameters") {
    CorpusConfig cc = smoke_corpus_config();
    cc.n_samples = 200;
    Vocabulary vocab(cc.n_keys, cc.n_values);
    auto corpus = gen_corpus(cc);
    ModelConfig mc = smoke_model_config(vocab.size());
    TrainConfig tc = smoke_train_config(30);
    tc.eval_every = 10;

    TrainResult a = train(mc, tc, corpus, vocab);
    TrainResult b = train(mc, tc, corpus, vocab);
    REQUIRE(a.log.rows.size() == b.log.rows.size());
    for (size_t i = 0; i < a.log.rows.size(); ++i) {
        CHECK(a.log.rows[i].step == b.log.rows[i].step);
        CHECK(a.log.rows[i].loss == b.log.rows[i].loss);  // bitwise
        CHECK(a.log.rows[i].acc_cqo == b.log.rows[i].acc_cqo);
        CHECK(a.log.rows[i].acc_qoc == b.log.rows[i].acc_qoc);
    }
    CHECK(model_fingerprint(a.model) == model_fingerprint(b.model));

    TrainConfig other = tc;
    other.seed = 4;
    TrainResult c = train(mc, other, corpus, vocab);
    CHECK(model_fingerprint(c.model) != model_fingerprint(a.model));
}

TEST_CASE("train/held-out split is disjoint and id-based") {
    CorpusConfig cc = smoke_corpus_config();
    cc.n_samples = 100;
    Vocabulary vocab(cc.n_keys, cc.n_values);
    auto corpus = gen_corpus(cc);
    ModelConfig mc = smoke_model_config(vocab.size());
    TrainResult r = train(mc, smoke_train_config(0), corpus, vocab);
    CHECK(r.train_ids.size() == 80);
    CHECK(r.heldout_ids.size() == 20);
    for (size_t id : r.train_ids) CHECK_FALSE(is_heldout_id(id));
    for (size_t id : r.heldout_ids) CHECK(is_heldout_id(id));
}

TEST_CASE("adam updates never exceed lr x grad_clip in max-norm") {
    CorpusConfig cc = smoke_corpus_config();
    cc.n_samples = 60;
    Vocabulary vocab(cc.n_keys, cc.n_values);
    auto corpus = gen_corpus(cc);
    ModelConfig mc = smoke_model_config(vocab.size());
    Model model = init_model(mc);
    set_requires_grad(model, true);
    AdamState adam = make_adam_state(model);

    TokenizedPrompt p = render(vocab, corpus[0], Ordering::CQO, ArchFlavor::Decoder);
    const double lr = 0.05, clip = 0.7;
    for (int step = 0; step < 5; ++step) {
        zero_grads(model);
        Tape tape;
        ForwardOptions opts;
        opts.tape = &tape;
        ForwardResult r = forward(model.stack, p.tokens, default_policy(mc.arch), opts);
        Tensor row = reshape(&tape, slice_rows(&tape, r.logits, p.tokens.size() - 1,
                                               p.tokens.size()),
                             {static_cast<size_t>(mc.vocab_size)});
        Tensor loss = cross_entropy(&tape, row, static_cast<size_t>(vocab.label_token(0)));
        backward(loss, tape);
        double max_step = adam_step(model, adam, lr, clip);
        CHECK(max_step <= lr * clip + 1e-15);
    }
}

TEST_CASE("training failure reports the step index") {
    CorpusConfig cc = smoke_corpus_config();
    cc.n_samples = 60;
    Vocabulary vocab(cc.n_keys, cc.n_values);
    auto corpus = gen_corpus(cc);
    ModelConfig mc = smoke_model_config(vocab.size());
    TrainConfig tc = smoke_train_config(5);
    tc.learning_rate = 1e18;  // guaranteed blow-up
    try {
        train(mc, tc, corpus, vocab);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("train config validation") {
    TrainConfig t = smoke_train_config(10);
    t.mix_cqo = -1.0;
    CHECK_THROWS_AS(t.validate(), ContractError);
    t = smoke_train_config(10);
    t.mix_cqo = 0.0;
    t.mix_qoc = 0.0;
    CHECK_THROWS_AS(t.validate(), ContractError);
    t = smoke_train_config(10);
    t.batch_size = 0;
    CHECK_THROWS_AS(t.validate(), ContractError);
    t = smoke_train_config(10);
    t.learning_rate = 0.0;
    CHECK_THROWS_AS(t.validate(), ContractError);
}

// Smoke test: the smallest valid task is learnable to high held-out accuracy
// inside the frozen step budget, and the training-loss trend is nonincreasing
// over trailing windows of 10 eval points.
TEST_CASE("smoke training run reaches high accuracy with a nonincreasing loss trend") {
    CorpusConfig cc = smoke_corpus_config();
    Vocabulary vocab(cc.n_keys, cc.n_values);
    auto corpus = gen_corpus(cc);
    ModelConfig mc = smoke_model_config(vocab.size());
    TrainConfig tc = smoke_train_config(ORDLAB_SMOKE_STEPS);
    TrainResult r = train(mc, tc, corpus, vocab);
    INFO("best held-out CQO accuracy ", r.best_acc_cqo, " at step ", r.best_step);
    CHECK(r.best_acc_cqo >= 0.99);

    // Trailing-window trend guard for the accepted preset.
    const auto& rows = r.log.rows;
    REQUIRE(rows.size() >= 12);
    auto window_mean = [&](size_t end) {
        double s = 0.0;
        for (size_t i = end - 10; i < end; ++i) s += rows[i].loss;
        return s / 10.0;
    };
    for (size_t end = 11; end <= rows.size(); ++end)
        CHECK(window_mean(end) <= window_mean(end - 1) + 0.02);

    // hypothesis1 probe runs on the trained model and reports both orderings.
    std::vector<Sample> held;
    for (size_t i = 0; i < corpus.size(); ++i)
        if (is_heldout_id(i)) held.push_back(corpus[i]);
    Hypothesis1Result h1 = hypothesis1_probe(r.model, held, vocab, 123);
    CHECK(h1.cqo.n == held.size());
    CHECK(h1.qoc.n == held.size());
    CHECK(h1.gap == doctest::Approx(h1.cqo.accuracy - h1.qoc.accuracy));
}
