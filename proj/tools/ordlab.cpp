// Experiment runner: corpus generation, training, evaluation, interventions,
// analysis and report/plot emission, one subcommand per pipeline stage.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "ordlab/analysis.hpp"
#include "ordlab/checkpoint.hpp"
#include "ordlab/corpus.hpp"
#include "ordlab/csv.hpp"
#include "ordlab/eval.hpp"
#include "ordlab/hash.hpp"
#include "ordlab/interventions.hpp"
#include "ordlab/manifest.hpp"
#include "ordlab/stats.hpp"
#include "ordlab/svg_plot.hpp"
#include "ordlab/trainer.hpp"

namespace fs = std::filesystem;
using namespace ordlab;

namespace {

// Exit-code taxonomy (documented in the README):
//   0 success, 2 usage, 3 manifest/schema violation, 4 missing upstream
//   artifact, 5 numeric or training failure, 6 contract/other lab error,
//   7 unexpected error.
enum ExitCode {
    kOk = 0,
    kUsage = 2,
    kSchema = 3,
    kMissingArtifact = 4,
    kNumeric = 5,
    kLabError = 6,
    kUnexpected = 7,
};

struct GlobalArgs {
    std::string manifest_path;
    std::string out_root;
    int workers = 1;
    uint64_t seed_override = 0;
    bool has_seed_override = false;
};

std::string default_out_root() {
    const char* env = std::getenv("ORDLAB_OUT");
    return env ? env : "out";
}

ExperimentManifest load_and_override(const GlobalArgs& g) {
    ExperimentManifest m = load_manifest(g.manifest_path);
    if (g.has_seed_override) {
        m.corpus_seed = m.train_seed = m.eval_seed = g.seed_override;
        if (m.corpus) m.corpus->seed = g.seed_override;
        if (m.train) m.train->seed = g.seed_override;
    }
    return m;
}

Vocabulary vocab_for(const ExperimentManifest& m) {
    if (!m.corpus) throw SchemaError("manifest " + m.source_path + ": missing configs.corpus");
    return Vocabulary(m.corpus->n_keys, m.corpus->n_values);
}

void check_vocab_matches_model(const ExperimentManifest& m, const Vocabulary& vocab) {
    if (!m.model) throw SchemaError("manifest " + m.source_path + ": missing configs.model");
    if (m.model->vocab_size != vocab.size())
        throw SchemaError("manifest " + m.source_path + ": model vocab_size " +
                          std::to_string(m.model->vocab_size) + " != vocabulary size " +
                          std::to_string(vocab.size()));
}

std::vector<Sample> load_split(const ExperimentManifest& m, const std::string& out_root,
                               const std::string& split) {
    std::vector<Sample> corpus = load_corpus(corpus_path(out_root, m));
    std::vector<Sample> out;
    for (size_t i = 0; i < corpus.size(); ++i) {
        bool held = is_heldout_id(i);
        if (split == "all" || (split == "heldout" && held) || (split == "train" && !held))
            out.push_back(corpus[i]);
    }
    if (out.empty()) throw ArtifactError("split '" + split + "' selected no samples");
    return out;
}

void write_kv_record(const std::string& path, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("cannot open " + path);
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

// ---- gen --------------------------------------------------------------------

int cmd_gen(const GlobalArgs& g) {
    ExperimentManifest m = load_and_override(g);
    if (!m.corpus) throw SchemaError("manifest " + m.source_path + ": missing configs.corpus");
    fs::create_directories(manifest_out_dir(g.out_root, m));
    std::vector<Sample> corpus = gen_corpus(*m.corpus);
    save_corpus(corpus, corpus_path(g.out_root, m));
    PositionStats st = corpus_position_stats(corpus, *m.corpus);
    std::vector<std::pair<std::string, std::string>> kv{
        {"manifest_hash", m.hash},
        {"n_samples", std::to_string(corpus.size())},
        {"corpus_fp", hex64(corpus_fingerprint(corpus))},
        {"chance_accuracy", fmt_double(chance_accuracy(*m.corpus))},
        {"position_chi_square", fmt_double(st.chi_square)},
        {"position_p_value", fmt_double(st.p_value)},
    };
    for (int i = 0; i < 4; ++i)
        kv.emplace_back(std::string("count_") + static_cast<char>('A' + i),
                        std::to_string(st.counts[static_cast<size_t>(i)]));
    write_kv_record(manifest_out_dir(g.out_root, m) + "/gen_record.txt", kv);
    std::cout << "gen: " << corpus.size() << " samples, position p=" << fmt_double(st.p_value)
              << "\n";
    return kOk;
}

// ---- train ------------------------------------------------------------------

int cmd_train(const GlobalArgs& g) {
    ExperimentManifest m = load_and_override(g);
    if (!m.train) throw SchemaError("manifest " + m.source_path + ": missing configs.train");
    Vocabulary vocab = vocab_for(m);
    check_vocab_matches_model(m, vocab);
    std::vector<Sample> corpus = load_corpus(corpus_path(g.out_root, m));

    TrainResult result = train(*m.model, *m.train, corpus, vocab);
    save_model(result.model, checkpoint_path(g.out_root, m), m.hash);

    Csv log;
    log.header = {"schema_version", "manifest_hash", "step", "loss", "acc_cqo", "acc_qoc"};
    for (const TrainLogRow& row : result.log.rows)
        log.add_row({"1", m.hash, std::to_string(row.step), fmt_double(row.loss),
                     fmt_double(row.acc_cqo), fmt_double(row.acc_qoc)});
    write_csv(log, manifest_out_dir(g.out_root, m) + "/trainlog.csv");

    write_kv_record(manifest_out_dir(g.out_root, m) + "/train_record.txt",
                    {{"manifest_hash", m.hash},
                     {"best_step", std::to_string(result.best_step)},
                     {"best_acc_cqo", fmt_double(result.best_acc_cqo)},
                     {"param_count", std::to_string(param_count(result.model.stack))},
                     {"model_fp", hex64(model_fingerprint(result.model))}});
    std::cout << "train: best held-out CQO accuracy " << fmt_double(result.best_acc_cqo)
              << " at step " << result.best_step << "\n";
    return kOk;
}

// ---- eval -------------------------------------------------------------------

void append_report_rows(Csv& csv, const EvalReport& rep, const ExperimentManifest& m,
                        const std::string& arch) {
    auto add = [&](const std::string& kind, const std::string& stratum, size_t n, size_t correct) {
        double acc = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
        csv.add_row({"1", m.hash, hex64(rep.model_fp), hex64(rep.corpus_fp), arch,
                     ordering_name(rep.ordering), std::to_string(rep.fewshot_k), kind, stratum,
                     std::to_string(n), std::to_string(correct), fmt_double(acc)});
    };
    add("all", "all", rep.n, rep.correct);
    for (int i = 0; i < 4; ++i)
        add("position", std::string(1, static_cast<char>('A' + i)),
            rep.by_position[static_cast<size_t>(i)].n,
            rep.by_position[static_cast<size_t>(i)].correct);
    for (const auto& [bucket, st] : rep.by_context_length)
        add("bucket", std::to_string(bucket), st.n, st.correct);
}

int cmd_eval(const GlobalArgs& g, int dump_prompts) {
    ExperimentManifest m = load_and_override(g);
    if (m.evals.empty()) throw SchemaError("manifest " + m.source_path + ": missing configs.eval");
    Vocabulary vocab = vocab_for(m);
    check_vocab_matches_model(m, vocab);
    Model model = load_model(checkpoint_path(g.out_root, m)).model;
    std::vector<Sample> split = load_split(m, g.out_root, m.eval_split);

    Csv csv;
    csv.header = {"schema_version", "manifest_hash", "model_fp", "corpus_fp", "arch",
                  "ordering",       "fewshot_k",     "stratum_kind", "stratum",
                  "n",              "correct",       "accuracy"};
    for (const EvalSpecEntry& spec : m.evals) {
        EvalReport rep =
            evaluate(model, split, vocab, spec.ordering, spec.fewshot_k, m.eval_seed, g.workers);
        append_report_rows(csv, rep, m, architecture_name(m.model->arch));
        std::cout << "eval: " << ordering_name(spec.ordering) << " k=" << spec.fewshot_k
                  << " accuracy=" << fmt_double(rep.accuracy) << "\n";
        if (dump_prompts > 0) {
            fs::path dir = fs::path(manifest_out_dir(g.out_root, m)) / "prompts";
            fs::create_directories(dir);
            ArchFlavor flavor = flavor_for(m.model->arch);
            for (int i = 0; i < dump_prompts && i < static_cast<int>(split.size()); ++i) {
                TokenizedPrompt p =
                    render(vocab, split[static_cast<size_t>(i)], spec.ordering, flavor);
                std::ofstream f(dir / (std::string(ordering_name(spec.ordering)) + "_k" +
                                       std::to_string(spec.fewshot_k) + "_" + std::to_string(i) +
                                       ".txt"));
                f << dump_prompt(vocab, p);
            }
        }
    }
    std::string path = manifest_out_dir(g.out_root, m) + "/eval.csv";
    write_csv(csv, path);
    lint_csv(path);
    return kOk;
}

// ---- intervene --------------------------------------------------------------

int cmd_intervene(const GlobalArgs& g, const std::string& kind) {
    ExperimentManifest m = load_and_override(g);
    Vocabulary vocab = vocab_for(m);
    check_vocab_matches_model(m, vocab);
    Model model = load_model(checkpoint_path(g.out_root, m)).model;
    std::vector<Sample> split = load_split(m, g.out_root, m.eval_split);
    const uint64_t model_fp = model_fingerprint(model);
    const uint64_t corpus_fp = corpus_fingerprint(split);

    Ordering base_ordering = kind == "prune" ? Ordering::CQO : Ordering::QOC;
    EvalReport baseline = evaluate(model, split, vocab, base_ordering, 0, m.eval_seed, g.workers);

    SampleScorer scorer;
    if (kind == "prune") {
        scorer = [&model](const Sample&, const TokenizedPrompt& p) {
            return prune_and_score(model, p);
        };
    } else if (kind == "patch") {
        scorer = [&model, &vocab](const Sample& s, const TokenizedPrompt&) {
            return patch_and_score(model, vocab, s);
        };
    } else if (kind == "qoco") {
        scorer = [&model, &vocab](const Sample& s, const TokenizedPrompt&) {
            return qoco_score(model, vocab, s);
        };
    } else {
        throw ContractError("intervene: unknown kind '" + kind + "'");
    }
    EvalReport treated = evaluate_with_scorer(split, vocab, base_ordering, 0, ArchFlavor::Decoder,
                                              scorer, m.eval_seed, g.workers);

    size_t n_plus = 0, n_minus = 0;
    for (size_t i = 0; i < split.size(); ++i) {
        if (treated.per_sample_correct[i] && !baseline.per_sample_correct[i]) ++n_plus;
        if (!treated.per_sample_correct[i] && baseline.per_sample_correct[i]) ++n_minus;
    }
    double p = sign_test_pvalue(n_plus, n_minus);

    Csv csv;
    csv.header = {"schema_version", "manifest_hash", "model_fp",  "corpus_fp",
                  "intervention",   "base_ordering", "n",         "baseline_correct",
                  "treated_correct", "baseline_accuracy", "treated_accuracy",
                  "n_plus",         "n_minus",       "p_value"};
    csv.add_row({"1", m.hash, hex64(model_fp), hex64(corpus_fp), kind,
                 ordering_name(base_ordering), std::to_string(split.size()),
                 std::to_string(baseline.correct), std::to_string(treated.correct),
                 fmt_double(baseline.accuracy), fmt_double(treated.accuracy),
                 std::to_string(n_plus), std::to_string(n_minus), fmt_double(p)});
    std::string path = manifest_out_dir(g.out_root, m) + "/intervene_" + kind + ".csv";
    write_csv(csv, path);
    lint_csv(path);
    std::cout << "intervene " << kind << ": baseline=" << fmt_double(baseline.accuracy)
              << " treated=" << fmt_double(treated.accuracy) << " p=" << fmt_double(p) << "\n";
    return kOk;
}

// ---- analyze ----------------------------------------------------------------

int cmd_analyze(const GlobalArgs& g, const std::string& kind, int n_samples) {
    ExperimentManifest m = load_and_override(g);
    Vocabulary vocab = vocab_for(m);
    check_vocab_matches_model(m, vocab);
    Model model = load_model(checkpoint_path(g.out_root, m)).model;
    std::vector<Sample> split = load_split(m, g.out_root, m.eval_split);
    size_t limit = std::min<size_t>(split.size(), static_cast<size_t>(n_samples));
    std::string out_dir = manifest_out_dir(g.out_root, m);

    if (kind == "attention") {
        if (model.config.arch == Architecture::EncoderDecoder)
            throw ProtocolError("analyze attention: single-stack models only");
        Csv csv;
        csv.header = {"schema_version", "manifest_hash", "ordering", "query_set",
                      "layer",          "mean_option_attention", "n_samples"};
        for (Ordering ordering : {Ordering::CQO, Ordering::QOC}) {
            for (QuerySet qs : {QuerySet::CueOnly, QuerySet::AllPostOption}) {
                std::vector<double> acc(static_cast<size_t>(model.config.n_layers), 0.0);
                for (size_t i = 0; i < limit; ++i) {
                    TokenizedPrompt p = render(vocab, split[i], ordering,
                                               flavor_for(model.config.arch));
                    ForwardOptions opts;
                    opts.capture_trace = true;
                    ForwardResult r =
                        forward(model.stack, p.tokens, default_policy(model.config.arch), opts);
                    AttentionProfile prof = attention_profile(*r.trace, p.spans, qs);
                    for (size_t l = 0; l < acc.size(); ++l) acc[l] += prof.per_layer[l];
                }
                for (size_t l = 0; l < acc.size(); ++l)
                    csv.add_row({"1", m.hash, ordering_name(ordering), query_set_name(qs),
                                 std::to_string(l), fmt_double(acc[l] / static_cast<double>(limit)),
                                 std::to_string(limit)});
            }
        }
        write_csv(csv, out_dir + "/attention_profile.csv");
        lint_csv(out_dir + "/attention_profile.csv");
    } else if (kind == "attribution") {
        set_requires_grad(model, true);
        Csv csv;
        csv.header = {"schema_version", "manifest_hash", "ordering", "sample_id",
                      "target_mode",    "context_ratio", "degenerate"};
        for (Ordering ordering : {Ordering::CQO, Ordering::QOC}) {
            for (size_t i = 0; i < limit; ++i) {
                TokenizedPrompt p =
                    render(vocab, split[i], ordering, flavor_for(model.config.arch));
                AttributionReport rep = grad_x_input(model, p, AttributionTarget::Predicted,
                                                     split[i].answer_idx);
                csv.add_row({"1", m.hash, ordering_name(ordering), std::to_string(i), "predicted",
                             fmt_double(rep.context_ratio), rep.degenerate ? "1" : "0"});
            }
        }
        write_csv(csv, out_dir + "/attribution.csv");
        lint_csv(out_dir + "/attribution.csv");
    } else {
        throw ContractError("analyze: unknown kind '" + kind + "'");
    }
    std::cout << "analyze " << kind << ": " << limit << " samples\n";
    return kOk;
}

// ---- recall -----------------------------------------------------------------

int cmd_recall(const GlobalArgs& g, int n_samples) {
    ExperimentManifest m = load_and_override(g);
    Vocabulary vocab = vocab_for(m);
    check_vocab_matches_model(m, vocab);
    Model model = load_model(checkpoint_path(g.out_root, m)).model;
    std::vector<Sample> split = load_split(m, g.out_root, m.eval_split);
    size_t limit = std::min<size_t>(split.size(), static_cast<size_t>(n_samples));

    Csv csv;
    csv.header = {"schema_version", "manifest_hash", "ordering", "option",
                  "n_probes",       "matched",       "recall_rate"};
    for (Ordering ordering : {Ordering::CQO, Ordering::QOC}) {
        std::array<size_t, 4> matched{}, probes{};
        for (size_t i = 0; i < limit; ++i) {
            TokenizedPrompt p = render(vocab, split[i], ordering, ArchFlavor::Decoder);
            for (int opt = 0; opt < 4; ++opt) {
                probes[static_cast<size_t>(opt)]++;
                if (recall_probe(model, p, opt)) matched[static_cast<size_t>(opt)]++;
            }
        }
        size_t total_m = 0, total_p = 0;
        for (int opt = 0; opt < 4; ++opt) {
            total_m += matched[static_cast<size_t>(opt)];
            total_p += probes[static_cast<size_t>(opt)];
            csv.add_row({"1", m.hash, ordering_name(ordering),
                         std::string(1, static_cast<char>('A' + opt)),
                         std::to_string(probes[static_cast<size_t>(opt)]),
                         std::to_string(matched[static_cast<size_t>(opt)]),
                         fmt_double(static_cast<double>(matched[static_cast<size_t>(opt)]) /
                                    static_cast<double>(probes[static_cast<size_t>(opt)]))});
        }
        csv.add_row({"1", m.hash, ordering_name(ordering), "all", std::to_string(total_p),
                     std::to_string(total_m),
                     fmt_double(static_cast<double>(total_m) / static_cast<double>(total_p))});
        std::cout << "recall " << ordering_name(ordering) << ": "
                  << fmt_double(static_cast<double>(total_m) / static_cast<double>(total_p))
                  << "\n";
    }
    std::string path = manifest_out_dir(g.out_root, m) + "/recall.csv";
    write_csv(csv, path);
    lint_csv(path);
    return kOk;
}

// ---- report -----------------------------------------------------------------

struct MemberData {
    ExperimentManifest manifest;
    Csv eval;
    std::string arch;
};

double member_accuracy(const Csv& eval, const std::string& ordering, int k) {
    for (size_t r = 0; r < eval.rows.size(); ++r) {
        if (cell(eval, r, "ordering") == ordering && cell(eval, r, "fewshot_k") == std::to_string(k) &&
            cell(eval, r, "stratum_kind") == "all")
            return std::stod(cell(eval, r, "accuracy"));
    }
    throw ArtifactError("report: member eval.csv lacks ordering " + ordering + " k=" +
                        std::to_string(k));
}

int cmd_report(const GlobalArgs& g) {
    ExperimentManifest m = load_and_override(g);
    if (m.members.empty()) throw SchemaError("manifest " + m.source_path + ": report needs members");
    std::string out_dir = manifest_out_dir(g.out_root, m);
    fs::create_directories(out_dir);

    std::map<std::string, MemberData> members;  // keyed by architecture
    fs::path base = fs::path(m.source_path).parent_path();
    for (const std::string& member_path : m.members) {
        fs::path p = fs::path(member_path);
        if (p.is_relative()) p = base / p;
        MemberData md;
        md.manifest = load_manifest(p.string());
        if (!md.manifest.model)
            throw SchemaError("report member " + member_path + " lacks a model config");
        md.arch = architecture_name(md.manifest.model->arch);
        std::string eval_path = manifest_out_dir(g.out_root, md.manifest) + "/eval.csv";
        lint_csv(eval_path);
        md.eval = read_csv(eval_path);
        members[md.arch] = md;
    }
    if (!members.count("decoder_only"))
        throw ArtifactError("report: a decoder_only member is required");
    const MemberData& dec = members.at("decoder_only");
    std::string dec_dir = manifest_out_dir(g.out_root, dec.manifest);

    auto pct = [](double frac) { return 100.0 * frac; };

    // fig2: decoder CQO vs QOC accuracy
    {
        double cqo = member_accuracy(dec.eval, "CQO", 0), qoc = member_accuracy(dec.eval, "QOC", 0);
        Csv csv;
        csv.header = {"schema_version", "manifest_hash", "ordering", "accuracy", "accuracy_pct"};
        csv.add_row({"1", m.hash, "CQO", fmt_double(cqo), fmt_double(pct(cqo))});
        csv.add_row({"1", m.hash, "QOC", fmt_double(qoc), fmt_double(pct(qoc))});
        write_csv(csv, out_dir + "/fig2.csv");
        svg_bar_chart(out_dir + "/fig2.svg", "Accuracy by prompt ordering (decoder)",
                      {"CQO", "QOC"}, {{"accuracy %", {pct(cqo), pct(qoc)}}}, "accuracy %");
    }

    // fig3b: QOC accuracy vs few-shot k
    {
        Csv csv;
        csv.header = {"schema_version", "manifest_hash", "fewshot_k", "accuracy", "accuracy_pct"};
        std::vector<double> xs, ys;
        for (int k : {0, 1, 3, 5}) {
            double acc = member_accuracy(dec.eval, "QOC", k);
            csv.add_row({"1", m.hash, std::to_string(k), fmt_double(acc), fmt_double(pct(acc))});
            xs.push_back(k);
            ys.push_back(pct(acc));
        }
        write_csv(csv, out_dir + "/fig3b.csv");
        svg_line_chart(out_dir + "/fig3b.svg", "QOC accuracy vs demonstrations", xs,
                       {{"QOC accuracy %", ys}}, "k-shot", "accuracy %");
    }

    // fig4: recall by ordering
    {
        Csv recall = read_csv(dec_dir + "/recall.csv");
        Csv csv;
        csv.header = {"schema_version", "manifest_hash", "ordering", "recall_rate"};
        std::vector<double> vals;
        for (const std::string& ord : {"CQO", "QOC"}) {
            double rate = -1;
            for (size_t r = 0; r < recall.rows.size(); ++r)
                if (cell(recall, r, "ordering") == ord && cell(recall, r, "option") == "all")
                    rate = std::stod(cell(recall, r, "recall_rate"));
            if (rate < 0) throw ArtifactError("report: recall.csv lacks ordering " + ord);
            csv.add_row({"1", m.hash, ord, fmt_double(rate)});
            vals.push_back(pct(rate));
        }
        write_csv(csv, out_dir + "/fig4.csv");
        svg_bar_chart(out_dir + "/fig4.svg", "Option recall by ordering", {"CQO", "QOC"},
                      {{"recall %", vals}}, "recall %");
    }

    // fig5a: gap per architecture
    {
        Csv csv;
        csv.header = {"schema_version", "manifest_hash", "arch", "acc_cqo", "acc_qoc",
                      "gap_points"};
        std::vector<std::string> cats;
        std::vector<double> gaps;
        for (const auto& [arch, md] : members) {
            double cqo = member_accuracy(md.eval, "CQO", 0), qoc = member_accuracy(md.eval, "QOC", 0);
            csv.add_row({"1", m.hash, arch, fmt_double(cqo), fmt_double(qoc),
                         fmt_double(pct(cqo - qoc))});
            cats.push_back(arch);
            gaps.push_back(pct(cqo - qoc));
        }
        write_csv(csv, out_dir + "/fig5a.csv");
        svg_bar_chart(out_dir + "/fig5a.svg", "CQO-QOC gap by architecture", cats,
                      {{"gap (points)", gaps}}, "gap (points)");
    }

    // fig5b: QOC vs QO (context removal)
    {
        double qoc = member_accuracy(dec.eval, "QOC", 0), qo = member_accuracy(dec.eval, "QO", 0);
        Csv csv;
        csv.header = {"schema_version", "manifest_hash", "ordering", "accuracy", "accuracy_pct"};
        csv.add_row({"1", m.hash, "QOC", fmt_double(qoc), fmt_double(pct(qoc))});
        csv.add_row({"1", m.hash, "QO", fmt_double(qo), fmt_double(pct(qo))});
        write_csv(csv, out_dir + "/fig5b.csv");
        svg_bar_chart(out_dir + "/fig5b.svg", "Context removal (decoder)", {"QOC", "QO"},
                      {{"accuracy %", {pct(qoc), pct(qo)}}}, "accuracy %");
    }

    // fig6a: attention profiles (cue_only rows)
    {
        Csv prof = read_csv(dec_dir + "/attention_profile.csv");
        Csv csv;
        csv.header = {"schema_version", "manifest_hash", "ordering", "layer",
                      "mean_option_attention"};
        std::map<std::string, std::vector<double>> series;
        size_t n_layers = 0;
        for (size_t r = 0; r < prof.rows.size(); ++r) {
            if (cell(prof, r, "query_set") != "cue_only") continue;
            std::string ord = cell(prof, r, "ordering");
            csv.add_row({"1", m.hash, ord, cell(prof, r, "layer"),
                         cell(prof, r, "mean_option_attention")});
            series[ord].push_back(std::stod(cell(prof, r, "mean_option_attention")));
            n_layers = std::max(n_layers, series[ord].size());
        }
        write_csv(csv, out_dir + "/fig6a.csv");
        std::vector<double> xs;
        for (size_t l = 0; l < n_layers; ++l) xs.push_back(static_cast<double>(l));
        std::vector<PlotSeries> ps;
        for (const auto& [name, vals] : series) ps.push_back({name, vals});
        svg_line_chart(out_dir + "/fig6a.svg", "Attention to options across layers", xs, ps,
                       "layer", "mean attention mass");
    }

    // fig6b: mean context attribution ratio
    {
        Csv attr = read_csv(dec_dir + "/attribution.csv");
        Csv csv;
        csv.header = {"schema_version", "manifest_hash", "ordering", "mean_context_ratio", "n"};
        std::vector<double> vals;
        for (const std::string& ord : {"CQO", "QOC"}) {
            double sum = 0.0;
            size_t n = 0;
            for (size_t r = 0; r < attr.rows.size(); ++r) {
                if (cell(attr, r, "ordering") != ord) continue;
                sum += std::stod(cell(attr, r, "context_ratio"));
                ++n;
            }
            if (n == 0) throw ArtifactError("report: attribution.csv lacks ordering " + ord);
            csv.add_row({"1", m.hash, ord, fmt_double(sum / static_cast<double>(n)),
                         std::to_string(n)});
            vals.push_back(sum / static_cast<double>(n));
        }
        write_csv(csv, out_dir + "/fig6b.csv");
        svg_bar_chart(out_dir + "/fig6b.svg", "Context attribution ratio", {"CQO", "QOC"},
                      {{"mean ratio", vals}}, "context ratio");
    }

    // tab2a/tab2b: stratified gaps from the decoder eval rows
    {
        auto stratum_rows = [&](const std::string& kind, const std::string& ordering) {
            std::map<std::string, std::pair<size_t, size_t>> out;  // stratum -> (n, correct)
            for (size_t r = 0; r < dec.eval.rows.size(); ++r) {
                if (cell(dec.eval, r, "stratum_kind") != kind) continue;
                if (cell(dec.eval, r, "ordering") != ordering) continue;
                if (cell(dec.eval, r, "fewshot_k") != "0") continue;
                out[cell(dec.eval, r, "stratum")] = {
                    std::stoull(cell(dec.eval, r, "n")),
                    std::stoull(cell(dec.eval, r, "correct"))};
            }
            return out;
        };
        for (const std::string& kind : {std::string("bucket"), std::string("position")}) {
            auto cqo = stratum_rows(kind, "CQO"), qoc = stratum_rows(kind, "QOC");
            Csv csv;
            csv.header = {"schema_version", "manifest_hash", "stratum", "n",
                          "acc_cqo",        "acc_qoc",       "gap_points"};
            std::vector<std::string> cats;
            std::vector<double> gaps;
            for (const auto& [stratum, nc] : cqo) {
                if (!qoc.count(stratum) || nc.first == 0 || qoc[stratum].first == 0) continue;
                double a = static_cast<double>(nc.second) / static_cast<double>(nc.first);
                double b = static_cast<double>(qoc[stratum].second) /
                           static_cast<double>(qoc[stratum].first);
                csv.add_row({"1", m.hash, stratum, std::to_string(nc.first), fmt_double(a),
                             fmt_double(b), fmt_double(pct(a - b))});
                cats.push_back(stratum);
                gaps.push_back(pct(a - b));
            }
            std::string name = kind == "bucket" ? "tab2a" : "tab2b";
            write_csv(csv, out_dir + "/" + name + ".csv");
            svg_bar_chart(out_dir + "/" + name + ".svg",
                          kind == "bucket" ? "Gap by context length" : "Gap by answer position",
                          cats, {{"gap (points)", gaps}}, "gap (points)");
        }
    }

    // tab3: interventions
    {
        Csv csv;
        csv.header = {"schema_version", "manifest_hash", "method", "accuracy", "accuracy_pct",
                      "delta_points"};
        auto load_iv = [&](const std::string& kind) {
            std::string path = dec_dir + "/intervene_" + kind + ".csv";
            lint_csv(path);
            return read_csv(path);
        };
        Csv prune = load_iv("prune"), patch = load_iv("patch"), qoco = load_iv("qoco");
        double cqo = std::stod(cell(prune, 0, "baseline_accuracy"));
        double pruned = std::stod(cell(prune, 0, "treated_accuracy"));
        double qoc = std::stod(cell(patch, 0, "baseline_accuracy"));
        double patched = std::stod(cell(patch, 0, "treated_accuracy"));
        double qoco_acc = std::stod(cell(qoco, 0, "treated_accuracy"));
        auto row = [&](const std::string& method, double acc, double base) {
            csv.add_row({"1", m.hash, method, fmt_double(acc), fmt_double(pct(acc)),
                         fmt_double(pct(acc - base))});
        };
        row("CQO", cqo, cqo);
        row("CQO+prune", pruned, cqo);
        row("QOC", qoc, qoc);
        row("QOC+patch", patched, qoc);
        row("QOCO", qoco_acc, qoc);
        write_csv(csv, out_dir + "/tab3.csv");
    }

    for (const std::string& f :
         {"fig2", "fig3b", "fig4", "fig5a", "fig5b", "fig6a", "fig6b", "tab2a", "tab2b", "tab3"})
        lint_csv(out_dir + "/" + std::string(f) + ".csv");
    std::cout << "report: wrote fig2 fig3b fig4 fig5a fig5b fig6a fig6b tab2a tab2b tab3\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ordlab: desk-scale prompt-ordering laboratory"};
    app.require_subcommand(1);

    GlobalArgs g;
    g.out_root = default_out_root();

    std::string intervene_kind, analyze_kind, lint_path;
    int dump_prompts = 0;
    int analyze_samples = 500;
    int recall_samples = 500;

    auto add_common = [&](CLI::App* sub, bool needs_manifest = true) {
        auto* opt = sub->add_option("--manifest", g.manifest_path, "experiment manifest (JSON)");
        if (needs_manifest) opt->required();
        sub->add_option("--out", g.out_root, "output root directory");
        sub->add_option("--workers", g.workers, "per-sample parallelism for eval/analyze");
        sub->add_option("--seed-override", g.seed_override, "override all manifest seeds")
            ->each([&](const std::string&) { g.has_seed_override = true; });
    };

    add_common(app.add_subcommand("gen", "generate a synthetic corpus"));
    add_common(app.add_subcommand("train", "train a model on the corpus"));
    auto* eval_cmd = app.add_subcommand("eval", "evaluate orderings x few-shot");
    add_common(eval_cmd);
    eval_cmd->add_option("--dump-prompts", dump_prompts, "dump the first N prompts per condition");
    auto* iv = app.add_subcommand("intervene", "attention pruning / patching / QOCO");
    add_common(iv);
    iv->add_option("--kind", intervene_kind, "prune | patch | qoco")->required();
    auto* an = app.add_subcommand("analyze", "attention profiles / attribution");
    add_common(an);
    an->add_option("--kind", analyze_kind, "attention | attribution")->required();
    an->add_option("--samples", analyze_samples, "sample budget");
    auto* rc = app.add_subcommand("recall", "option recall probe");
    add_common(rc);
    rc->add_option("--samples", recall_samples, "sample budget");
    add_common(app.add_subcommand("report", "join member CSVs into figure/table analogs"));
    auto* lint = app.add_subcommand("lint", "lint an emitted CSV");
    lint->add_option("--csv", lint_path, "path to CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc_parse = app.exit(e);
        return rc_parse == 0 ? kOk : kUsage;
    }

    try {
        if (app.got_subcommand("gen")) return cmd_gen(g);
        if (app.got_subcommand("train")) return cmd_train(g);
        if (app.got_subcommand("eval")) return cmd_eval(g, dump_prompts);
        if (app.got_subcommand("intervene")) return cmd_intervene(g, intervene_kind);
        if (app.got_subcommand("analyze")) return cmd_analyze(g, analyze_kind, analyze_samples);
        if (app.got_subcommand("recall")) return cmd_recall(g, recall_samples);
        if (app.got_subcommand("report")) return cmd_report(g);
        if (app.got_subcommand("lint")) {
            lint_csv(lint_path);
            std::cout << "lint: ok\n";
            return kOk;
        }
        return kUsage;
    } catch (const SchemaError& e) {
        std::cerr << nlohmann::json{{"error", "schema"}, {"message", e.what()}, {"code", kSchema}}
                  << "\n";
        return kSchema;
    } catch (const ArtifactError& e) {
        std::cerr << nlohmann::json{
                         {"error", "artifact"}, {"message", e.what()}, {"code", kMissingArtifact}}
                  << "\n";
        return kMissingArtifact;
    } catch (const NumericError& e) {
        std::cerr << nlohmann::json{{"error", "numeric"}, {"message", e.what()}, {"code", kNumeric}}
                  << "\n";
        return kNumeric;
    } catch (const TrainingError& e) {
        std::cerr << nlohmann::json{{"error", "training"}, {"message", e.what()}, {"code", kNumeric}}
                  << "\n";
        return kNumeric;
    } catch (const Error& e) {
        std::cerr << nlohmann::json{{"error", "lab"}, {"message", e.what()}, {"code", kLabError}}
                  << "\n";
        return kLabError;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{
                         {"error", "unexpected"}, {"message", e.what()}, {"code", kUnexpected}}
                  << "\n";
        return kUnexpected;
    }
}
