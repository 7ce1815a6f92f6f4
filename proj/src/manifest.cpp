#include "ordlab/manifest.hpp"

#include <json.hpp>

#include <fstream>

#include "ordlab/hash.hpp"

namespace ordlab {

using nlohmann::json;

namespace {

[[noreturn]] void missing(const std::string& path, const std::string& key) {
    throw SchemaError("manifest " + path + ": missing required field '" + key + "'");
}

template <typename T>
T require(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key)) missing(path, key);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError("manifest " + path + ": field '" + key + "': " + e.what());
    }
}

ModelConfig parse_model(const json& j, const std::string& path) {
    ModelConfig c;
    c.arch = architecture_from_name(require<std::string>(j, path, "arch"));
    c.n_layers = require<int>(j, path, "n_layers");
    c.n_heads = require<int>(j, path, "n_heads");
    c.d_model = require<int>(j, path, "d_model");
    c.d_ff = require<int>(j, path, "d_ff");
    c.vocab_size = require<int>(j, path, "vocab_size");
    c.max_seq = require<int>(j, path, "max_seq");
    c.seed = require<uint64_t>(j, path, "seed");
    try {
        c.validate();
    } catch (const Error& e) {
        throw SchemaError("manifest " + path + ": model config: " + e.what());
    }
    return c;
}

CorpusConfig parse_corpus(const json& j, const std::string& path) {
    CorpusConfig c;
    c.n_samples = require<size_t>(j, path, "n_samples");
    c.n_facts_choices = require<std::vector<int>>(j, path, "n_facts_choices");
    c.n_options = j.value("n_options", 4);
    c.answer_position_weights =
        require<std::vector<double>>(j, path, "answer_position_weights");
    c.seed = require<uint64_t>(j, path, "seed");
    c.n_keys = require<int>(j, path, "n_keys");
    c.n_values = require<int>(j, path, "n_values");
    return c;
}

TrainConfig parse_train(const json& j, const std::string& path) {
    TrainConfig c;
    if (!j.contains("ordering_mix")) missing(path, "ordering_mix");
    const json& mix = j.at("ordering_mix");
    c.mix_cqo = require<double>(mix, path, "cqo");
    c.mix_qoc = require<double>(mix, path, "qoc");
    c.steps = require<size_t>(j, path, "steps");
    c.batch_size = require<size_t>(j, path, "batch_size");
    c.learning_rate = require<double>(j, path, "learning_rate");
    c.lr_schedule = lr_schedule_from_name(require<std::string>(j, path, "lr_schedule"));
    c.grad_clip = require<double>(j, path, "grad_clip");
    c.eval_every = require<size_t>(j, path, "eval_every");
    c.seed = require<uint64_t>(j, path, "seed");
    c.aux_lm_weight = j.value("aux_lm_weight", 1.0);
    try {
        c.validate();
    } catch (const Error& e) {
        throw SchemaError("manifest " + path + ": train config: " + e.what());
    }
    return c;
}

}  // namespace

ExperimentManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArtifactError("load_manifest: missing manifest " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError("manifest " + path + ": parse error: " + e.what());
    }

    ExperimentManifest m;
    m.source_path = path;
    m.name = require<std::string>(j, path, "name");
    m.paper_anchor = require<std::string>(j, path, "paper_anchor");
    m.version = require<std::string>(j, path, "version");
    m.out_dir = j.value("out_dir", m.name);

    if (j.contains("seeds")) {
        const json& seeds = j.at("seeds");
        m.corpus_seed = seeds.value("corpus", 0ull);
        m.train_seed = seeds.value("train", 0ull);
        m.eval_seed = seeds.value("eval", 0ull);
    }

    if (j.contains("configs")) {
        const json& cfgs = j.at("configs");
        if (cfgs.contains("model")) m.model = parse_model(cfgs.at("model"), path);
        if (cfgs.contains("corpus")) {
            m.corpus = parse_corpus(cfgs.at("corpus"), path);
            m.corpus->seed = m.corpus_seed ? m.corpus_seed : m.corpus->seed;
        }
        if (cfgs.contains("train")) {
            m.train = parse_train(cfgs.at("train"), path);
            if (m.train_seed) m.train->seed = m.train_seed;
        }
        if (cfgs.contains("eval")) {
            const json& ev = cfgs.at("eval");
            if (ev.contains("conditions")) {
                // explicit (ordering, fewshot) pairs
                for (const auto& cond : ev.at("conditions")) {
                    EvalSpecEntry e;
                    e.ordering = ordering_from_name(require<std::string>(cond, path, "ordering"));
                    e.fewshot_k = require<int>(cond, path, "fewshot");
                    m.evals.push_back(e);
                }
            } else {
                auto orderings = require<std::vector<std::string>>(ev, path, "orderings");
                auto ks = require<std::vector<int>>(ev, path, "fewshot");
                for (const std::string& o : orderings)
                    for (int k : ks) m.evals.push_back({ordering_from_name(o), k});
            }
            m.eval_split = ev.value("split", std::string("heldout"));
            if (m.eval_split != "heldout" && m.eval_split != "train" && m.eval_split != "all")
                throw SchemaError("manifest " + path + ": eval split must be heldout|train|all");
        }
    }

    if (j.contains("members")) m.members = require<std::vector<std::string>>(j, path, "members");

    m.hash = hex64(fnv1a64(j.dump()));
    return m;
}

std::string manifest_out_dir(const std::string& out_root, const ExperimentManifest& m) {
    return out_root + "/" + m.out_dir;
}

std::string corpus_path(const std::string& out_root, const ExperimentManifest& m) {
    return manifest_out_dir(out_root, m) + "/corpus.jsonl";
}

std::string checkpoint_path(const std::string& out_root, const ExperimentManifest& m) {
    return manifest_out_dir(out_root, m) + "/model.ckpt";
}

}  // namespace ordlab
