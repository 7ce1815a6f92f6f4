#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ordlab/corpus.hpp"
#include "ordlab/csv.hpp"
#include "ordlab/vocab.hpp"

using namespace ordlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int exit_code = 0;
    std::string stdout_text;
    std::string stderr_text;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliRun run_cli(const std::string& args, const fs::path& dir) {
    fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    std::string cmd = std::string(ORDLAB_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                      err.string();
    int rc = std::system(cmd.c_str());
    CliRun r;
    r.exit_code = WEXITSTATUS(rc);
    r.stdout_text = slurp(out);
    r.stderr_text = slurp(err);
    return r;
}

json tiny_manifest(const std::string& name, const std::string& arch, size_t steps) {
    int vocab_size = Vocabulary(10, 10).size();
    return json{
        {"name", name},
        {"paper_anchor", "fig2"},
        {"version", "test-v0"},
        {"out_dir", name},
        {"seeds", {{"corpus", 7}, {"train", 8}, {"eval", 9}}},
        {"configs",
         {{"model",
           {{"arch", arch},
            {"n_layers", 2},
            {"n_heads", 2},
            {"d_model", 16},
            {"d_ff", 32},
            {"vocab_size", vocab_size},
            {"max_seq", 320},
            {"seed", 1}}},
          {"corpus",
           {{"n_samples", 2000},
            {"n_facts_choices", {4, 6}},
            {"answer_position_weights", {1, 1, 1, 1}},
            {"seed", 7},
            {"n_keys", 10},
            {"n_values", 10}}},
          {"train",
           {{"ordering_mix", {{"cqo", 1.0}, {"qoc", 0.0}}},
            {"steps", steps},
            {"batch_size", 8},
            {"learning_rate", 0.003},
            {"lr_schedule", "constant"},
            {"grad_clip", 1.0},
            {"eval_every", 20},
            {"seed", 8}}},
          {"eval",
           {{"orderings", {"CQO", "QOC", "QO", "QOCO"}},
            {"fewshot", {0, 1, 3, 5}},
            {"split", "all"}}}}}};
}

struct CliFixture {
    fs::path root;
    fs::path configs;
    std::string out_root;

    CliFixture() {
        root = fs::temp_directory_path() / ("ordlab_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root / "configs");
        configs = root / "configs";
        out_root = (root / "out").string();
    }

    std::string write_manifest(const std::string& name, const json& j) {
        fs::path p = configs / (name + ".json");
        std::ofstream out(p);
        out << j.dump(2);
        return p.string();
    }

    std::string common(const std::string& manifest) const {
        return "--manifest " + manifest + " --out " + out_root;
    }
};

}  // namespace

TEST_CASE("cli pipeline: gen, train, eval, intervene, analyze, recall, report") {
    CliFixture fx;
    std::string dec = fx.write_manifest("dec", tiny_manifest("dec", "decoder_only", 40));
    std::string enc = fx.write_manifest("enc", tiny_manifest("enc", "encoder_only", 30));
    std::string ed = fx.write_manifest("ed", tiny_manifest("ed", "encoder_decoder", 30));

    // gen: corpus artifact + record with the chi-square p-value
    CliRun g = run_cli("gen " + fx.common(dec), fx.root);
    REQUIRE(g.exit_code == 0);
    fs::path corpus_file = fs::path(fx.out_root) / "dec" / "corpus.jsonl";
    REQUIRE(fs::exists(corpus_file));
    std::string record = slurp(fs::path(fx.out_root) / "dec" / "gen_record.txt");
    CHECK(record.find("position_p_value=") != std::string::npos);
    CHECK(record.find("manifest_hash=") != std::string::npos);

    // Idempotence: regenerating is byte-identical.
    std::string first = slurp(corpus_file);
    REQUIRE(run_cli("gen " + fx.common(dec), fx.root).exit_code == 0);
    CHECK(slurp(corpus_file) == first);

    // eval before train: missing checkpoint artifact -> exit 4
    CHECK(run_cli("eval " + fx.common(dec), fx.root).exit_code == 4);

    // train
    REQUIRE(run_cli("train " + fx.common(dec), fx.root).exit_code == 0);
    REQUIRE(fs::exists(fs::path(fx.out_root) / "dec" / "model.ckpt"));
    lint_csv((fs::path(fx.out_root) / "dec" / "trainlog.csv").string());

    // eval: untrained-scale accuracy lands within 3 points of chance (0.25)
    CliRun e = run_cli("eval " + fx.common(dec) + " --dump-prompts 2", fx.root);
    REQUIRE(e.exit_code == 0);
    fs::path eval_csv = fs::path(fx.out_root) / "dec" / "eval.csv";
    lint_csv(eval_csv.string());
    Csv ev = read_csv(eval_csv.string());
    size_t all_rows = 0;
    for (size_t r = 0; r < ev.rows.size(); ++r) {
        if (cell(ev, r, "stratum_kind") != "all") continue;
        ++all_rows;
        double acc = std::stod(cell(ev, r, "accuracy"));
        CHECK(acc >= 0.22);
        CHECK(acc <= 0.28);
    }
    CHECK(all_rows == 16);  // 4 orderings x 4 shot counts
    CHECK(fs::exists(fs::path(fx.out_root) / "dec" / "prompts" / "CQO_k0_0.txt"));

    // Rerunning eval reproduces the CSV byte for byte.
    std::string eval_bytes = slurp(eval_csv);
    REQUIRE(run_cli("eval " + fx.common(dec), fx.root).exit_code == 0);
    CHECK(slurp(eval_csv) == eval_bytes);

    // interventions, analysis, recall on the decoder
    for (const std::string& kind : {"prune", "patch", "qoco"}) {
        CliRun iv = run_cli("intervene --kind " + kind + " " + fx.common(dec), fx.root);
        REQUIRE(iv.exit_code == 0);
        lint_csv((fs::path(fx.out_root) / "dec" / ("intervene_" + kind + ".csv")).string());
    }
    REQUIRE(run_cli("analyze --kind attention --samples 40 " + fx.common(dec), fx.root).exit_code ==
            0);
    REQUIRE(run_cli("analyze --kind attribution --samples 40 " + fx.common(dec), fx.root)
                .exit_code == 0);
    REQUIRE(run_cli("recall --samples 25 " + fx.common(dec), fx.root).exit_code == 0);

    // encoder + encdec members for the report
    for (const std::string& mpath : {enc, ed}) {
        REQUIRE(run_cli("gen " + fx.common(mpath), fx.root).exit_code == 0);
        REQUIRE(run_cli("train " + fx.common(mpath), fx.root).exit_code == 0);
        REQUIRE(run_cli("eval " + fx.common(mpath), fx.root).exit_code == 0);
    }

    json report{{"name", "report"},
                {"paper_anchor", "all"},
                {"version", "test-v0"},
                {"out_dir", "report"},
                {"members", {"dec.json", "enc.json", "ed.json"}}};
    std::string rep = fx.write_manifest("report", report);
    CliRun rr = run_cli("report " + fx.common(rep), fx.root);
    INFO(rr.stderr_text);
    REQUIRE(rr.exit_code == 0);
    for (const std::string& f :
         {"fig2", "fig3b", "fig4", "fig5a", "fig5b", "fig6a", "fig6b", "tab2a", "tab2b", "tab3"}) {
        fs::path csv = fs::path(fx.out_root) / "report" / (f + ".csv");
        REQUIRE(fs::exists(csv));
        lint_csv(csv.string());
        if (f[0] == 'f') CHECK(fs::exists(fs::path(fx.out_root) / "report" / (f + ".svg")));
    }

    // Rerunning the report is byte-identical.
    std::string fig2 = slurp(fs::path(fx.out_root) / "report" / "fig2.csv");
    REQUIRE(run_cli("report " + fx.common(rep), fx.root).exit_code == 0);
    CHECK(slurp(fs::path(fx.out_root) / "report" / "fig2.csv") == fig2);

    // lint subcommand
    CHECK(run_cli("lint --csv " + eval_csv.string(), fx.root).exit_code == 0);

    fs::remove_all(fx.root);
}

TEST_CASE("cli error taxonomy") {
    CliFixture fx;

    // unknown subcommand -> usage
    CHECK(run_cli("frobnicate", fx.root).exit_code == 2);

    // missing manifest file -> missing artifact
    CHECK(run_cli("gen --manifest /nonexistent.json --out " + fx.out_root, fx.root).exit_code == 4);

    // schema violation -> exit 3 with a machine-readable stderr record
    json bad = tiny_manifest("bad", "decoder_only", 1);
    bad.erase("version");
    std::string bad_path = fx.write_manifest("bad", bad);
    CliRun r = run_cli("gen " + fx.common(bad_path), fx.root);
    CHECK(r.exit_code == 3);
    json err = json::parse(r.stderr_text);
    CHECK(err.at("error") == "schema");
    CHECK(err.at("code") == 3);
    CHECK(err.at("message").get<std::string>().find("version") != std::string::npos);

    // vocab/model mismatch is a schema error too
    json mismatch = tiny_manifest("mismatch", "decoder_only", 1);
    mismatch["configs"]["model"]["vocab_size"] = 999;
    std::string mm_path = fx.write_manifest("mismatch", mismatch);
    REQUIRE(run_cli("gen " + fx.common(mm_path), fx.root).exit_code == 0);
    CHECK(run_cli("train " + fx.common(mm_path), fx.root).exit_code == 3);

    fs::remove_all(fx.root);
}
