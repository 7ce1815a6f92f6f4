#include "ordlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "ordlab/hash.hpp"
#include "ordlab/rng.hpp"

namespace ordlab {

OptionDistribution restrict_to_labels(const double* row, size_t vocab_size) {
    if (vocab_size <= TOK_D) throw ProtocolError("restrict_to_labels: vocabulary lacks labels");
    OptionDistribution d;
    for (int i = 0; i < 4; ++i) d.logits[static_cast<size_t>(i)] = row[TOK_A + i];
    double mx = d.logits[0];
    for (double l : d.logits) mx = std::max(mx, l);
    double denom = 0.0;
    for (int i = 0; i < 4; ++i) {
        d.probs[static_cast<size_t>(i)] = std::exp(d.logits[static_cast<size_t>(i)] - mx);
        denom += d.probs[static_cast<size_t>(i)];
    }
    for (double& p : d.probs) p /= denom;
    d.predicted = 0;
    for (int i = 1; i < 4; ++i)
        if (d.logits[static_cast<size_t>(i)] > d.logits[static_cast<size_t>(d.predicted)])
            d.predicted = i;  // strict > breaks ties toward the lower index
    return d;
}

ArchFlavor flavor_for(Architecture arch) {
    switch (arch) {
        case Architecture::DecoderOnly: return ArchFlavor::Decoder;
        case Architecture::EncoderOnly: return ArchFlavor::EncoderCloze;
        case Architecture::EncoderDecoder: return ArchFlavor::EncDec;
    }
    throw ProtocolError("flavor_for: unknown architecture");
}

OptionDistribution score_options(const Model& model, const TokenizedPrompt& prompt,
                                 const MaskPolicy* policy_override, const PatchDirective* patch) {
    if (prompt.flavor != flavor_for(model.config.arch))
        throw ProtocolError(std::string("score_options: prompt flavor '") +
                            flavor_name(prompt.flavor) + "' does not match architecture '" +
                            architecture_name(model.config.arch) + "'");
    ForwardOptions opts;
    opts.patch = patch;
    const size_t vocab = static_cast<size_t>(model.config.vocab_size);

    if (model.config.arch == Architecture::EncoderDecoder) {
        if (policy_override)
            throw ProtocolError("score_options: mask-policy override applies to single stacks");
        std::vector<int> tgt{TOK_BOS};
        ForwardResult r = forward_encdec(model.stack, *model.decoder_stack, prompt.tokens, tgt, opts);
        return restrict_to_labels(r.logits->values.data(), vocab);
    }

    MaskPolicy policy = policy_override ? *policy_override : default_policy(model.config.arch);
    ForwardResult r = forward(model.stack, prompt.tokens, policy, opts);
    size_t row = scoring_row(prompt);
    return restrict_to_labels(r.logits->values.data() + row * vocab, vocab);
}

namespace {

// Deterministic, permutation-invariant demonstration pool: the corpus's
// lexicographically smallest serialized samples.
std::vector<Sample> build_demo_pool(const std::vector<Sample>& corpus, size_t pool_size) {
    std::vector<std::pair<std::string, size_t>> keyed;
    keyed.reserve(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) keyed.emplace_back(sample_to_line(corpus[i]), i);
    std::sort(keyed.begin(), keyed.end());
    std::vector<Sample> pool;
    for (size_t i = 0; i < keyed.size() && pool.size() < pool_size; ++i) {
        if (i > 0 && keyed[i].first == keyed[i - 1].first) continue;
        pool.push_back(corpus[keyed[i].second]);
    }
    return pool;
}

}  // namespace

EvalReport evaluate_with_scorer(const std::vector<Sample>& corpus, const Vocabulary& vocab,
                                Ordering ordering, int fewshot_k, ArchFlavor flavor,
                                const SampleScorer& scorer, uint64_t eval_seed, int workers) {
    if (corpus.empty()) throw ContractError("evaluate: empty corpus");
    if (fewshot_k != 0 && fewshot_k != 1 && fewshot_k != 3 && fewshot_k != 5)
        throw ContractError("evaluate: fewshot_k must be one of 0, 1, 3, 5");

    std::vector<Sample> pool;
    if (fewshot_k > 0) pool = build_demo_pool(corpus, 64);

    EvalReport rep;
    rep.ordering = ordering;
    rep.fewshot_k = fewshot_k;
    rep.n = corpus.size();
    rep.corpus_fp = corpus_fingerprint(corpus);
    rep.per_sample_correct.assign(corpus.size(), 0);

    std::vector<int> predictions(corpus.size(), -1);
    std::exception_ptr first_error;

    auto run_range = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const Sample& s = corpus[i];
            std::vector<std::pair<Sample, int>> demos;
            if (fewshot_k > 0) {
                std::string line = sample_to_line(s);
                Rng rng = Rng(eval_seed).derive(fnv1a64(line));
                std::vector<size_t> order(pool.size());
                for (size_t j = 0; j < pool.size(); ++j) order[j] = j;
                rng.shuffle(order);
                for (size_t j = 0; j < order.size() && demos.size() < static_cast<size_t>(fewshot_k);
                     ++j) {
                    const Sample& cand = pool[order[j]];
                    if (sample_to_line(cand) == line) continue;
                    demos.emplace_back(cand, cand.answer_idx);
                }
                if (demos.size() < static_cast<size_t>(fewshot_k))
                    throw ContractError("evaluate: demo pool too small for " +
                                        std::to_string(fewshot_k) + "-shot prompts");
            }
            TokenizedPrompt prompt = render(vocab, s, ordering, flavor, demos);
            try {
                predictions[i] = scorer(s, prompt).predicted;
            } catch (const Error& e) {
                throw Error("sample " + std::to_string(i) + ": " + e.what());
            }
        }
    };

    if (workers <= 1) {
        run_range(0, corpus.size());
    } else {
        size_t w = std::min<size_t>(static_cast<size_t>(workers), corpus.size());
        size_t chunk = (corpus.size() + w - 1) / w;
        std::vector<std::thread> threads;
        std::mutex err_mutex;
        for (size_t t = 0; t < w; ++t) {
            size_t b = t * chunk, e = std::min(corpus.size(), b + chunk);
            if (b >= e) break;
            threads.emplace_back([&, b, e] {
                try {
                    run_range(b, e);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            });
        }
        for (auto& th : threads) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    for (size_t i = 0; i < corpus.size(); ++i) {
        const Sample& s = corpus[i];
        bool ok = predictions[i] == s.answer_idx;
        rep.per_sample_correct[i] = ok ? 1 : 0;
        rep.correct += ok ? 1 : 0;
        auto& pos = rep.by_position[static_cast<size_t>(s.answer_idx)];
        pos.n++;
        pos.correct += ok ? 1 : 0;
        auto& bucket = rep.by_context_length[s.meta.n_facts];
        bucket.n++;
        bucket.correct += ok ? 1 : 0;
    }
    rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.n);
    return rep;
}

EvalReport evaluate(const Model& model, const std::vector<Sample>& corpus, const Vocabulary& vocab,
                    Ordering ordering, int fewshot_k, uint64_t eval_seed, int workers) {
    EvalReport rep = evaluate_with_scorer(
        corpus, vocab, ordering, fewshot_k, flavor_for(model.config.arch),
        [&model](const Sample&, const TokenizedPrompt& p) { return score_options(model, p); },
        eval_seed, workers);
    rep.model_fp = model_fingerprint(model);
    return rep;
}

double performance_gap(const EvalReport& cqo, const EvalReport& qoc) {
    if (cqo.model_fp != qoc.model_fp)
        throw ComparisonError("performance_gap: model fingerprints differ");
    if (cqo.corpus_fp != qoc.corpus_fp)
        throw ComparisonError("performance_gap: corpus fingerprints differ");
    return cqo.accuracy - qoc.accuracy;
}

bool recall_probe_with(const TokenizedPrompt& prompt, int option_index,
                       const NextTokenFn& next_token) {
    if (prompt.flavor != ArchFlavor::Decoder)
        throw ProtocolError("recall_probe: decoder-flavor prompts only");
    if (option_index < 0 || option_index > 3)
        throw IndexError("recall_probe: option index out of range");
    const Span& span = prompt.spans.option_spans[static_cast<size_t>(option_index)];
    std::vector<int> tokens = prompt.tokens;
    tokens.push_back(TOK_OPTION);
    tokens.push_back(TOK_A + option_index);
    tokens.push_back(TOK_COLON);
    for (size_t k = 0; k < span.size(); ++k) {
        int next = next_token(tokens);
        if (next != prompt.tokens[span.begin + k]) return false;
        tokens.push_back(next);
    }
    return true;
}

bool recall_probe(const Model& model, const TokenizedPrompt& prompt, int option_index) {
    if (model.config.arch != Architecture::DecoderOnly)
        throw ProtocolError("recall_probe: decoder-only models only");
    MaskPolicy policy = default_policy(model.config.arch);
    return recall_probe_with(prompt, option_index, [&](const std::vector<int>& tokens) {
        ForwardResult r = forward(model.stack, tokens, policy);
        const size_t vocab = static_cast<size_t>(model.config.vocab_size);
        const double* row = r.logits->values.data() + (tokens.size() - 1) * vocab;
        int best = 0;
        for (size_t j = 1; j < vocab; ++j)
            if (row[j] > row[static_cast<size_t>(best)]) best = static_cast<int>(j);
        return best;
    });
}

StratifiedGaps stratified_gaps(const EvalReport& cqo, const EvalReport& qoc) {
    if (cqo.model_fp != qoc.model_fp || cqo.corpus_fp != qoc.corpus_fp)
        throw ComparisonError("stratified_gaps: reports cover different model/corpus");
    StratifiedGaps out;
    for (int i = 0; i < 4; ++i) {
        StratumGap g;
        g.stratum = std::string(1, static_cast<char>('A' + i));
        g.n_cqo = cqo.by_position[static_cast<size_t>(i)].n;
        g.n_qoc = qoc.by_position[static_cast<size_t>(i)].n;
        if (g.n_cqo > 0 && g.n_qoc > 0) {
            double a = static_cast<double>(cqo.by_position[static_cast<size_t>(i)].correct) /
                       static_cast<double>(g.n_cqo);
            double b = static_cast<double>(qoc.by_position[static_cast<size_t>(i)].correct) /
                       static_cast<double>(g.n_qoc);
            g.gap_points = 100.0 * (a - b);
            g.defined = true;
        }
        out.by_position.push_back(g);
    }
    for (const auto& [bucket, stat] : cqo.by_context_length) {
        StratumGap g;
        g.stratum = std::to_string(bucket);
        g.n_cqo = stat.n;
        auto it = qoc.by_context_length.find(bucket);
        g.n_qoc = it == qoc.by_context_length.end() ? 0 : it->second.n;
        if (g.n_cqo > 0 && g.n_qoc > 0) {
            double a = static_cast<double>(stat.correct) / static_cast<double>(g.n_cqo);
            double b = static_cast<double>(it->second.correct) / static_cast<double>(g.n_qoc);
            g.gap_points = 100.0 * (a - b);
            g.defined = true;
        }
        out.by_context_length.push_back(g);
    }
    return out;
}

std::string report_to_kv(const EvalReport& report) {
    std::ostringstream os;
    os << "schema_version=" << report.schema_version << "\n";
    os << "ordering=" << ordering_name(report.ordering) << "\n";
    os << "fewshot_k=" << report.fewshot_k << "\n";
    os << "n=" << report.n << "\n";
    os << "correct=" << report.correct << "\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", report.accuracy);
    os << "accuracy=" << buf << "\n";
    os << "model_fp=" << hex64(report.model_fp) << "\n";
    os << "corpus_fp=" << hex64(report.corpus_fp) << "\n";
    for (int i = 0; i < 4; ++i) {
        const auto& st = report.by_position[static_cast<size_t>(i)];
        os << "position_" << static_cast<char>('A' + i) << "=" << st.correct << "/" << st.n << "\n";
    }
    for (const auto& [bucket, st] : report.by_context_length)
        os << "bucket_" << bucket << "=" << st.correct << "/" << st.n << "\n";
    return os.str();
}

}  // namespace ordlab
