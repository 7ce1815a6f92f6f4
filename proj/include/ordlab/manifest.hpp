#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ordlab/corpus.hpp"
#include "ordlab/model.hpp"
#include "ordlab/prompt.hpp"
#include "ordlab/trainer.hpp"

namespace ordlab {

struct EvalSpecEntry {
    Ordering ordering;
    int fewshot_k = 0;
};

// One experiment, mapped to the paper figure/table it mirrors. The manifest
// hash stamps every emitted artifact.
struct ExperimentManifest {
    std::string name;
    std::string paper_anchor;  // e.g. "fig2", "tab3"
    std::string version;       // git-describe-style string
    std::string out_dir;       // subdirectory under the output root

    uint64_t corpus_seed = 0;
    uint64_t train_seed = 0;
    uint64_t eval_seed = 0;

    std::optional<ModelConfig> model;
    std::optional<CorpusConfig> corpus;
    std::optional<TrainConfig> train;
    std::vector<EvalSpecEntry> evals;
    std::string eval_split = "heldout";  // heldout | train | all

    // report manifests: member experiment manifests to join
    std::vector<std::string> members;

    std::string source_path;
    std::string hash;  // FNV-1a of the canonical JSON dump, hex
};

ExperimentManifest load_manifest(const std::string& path);

// Resolved artifact locations inside the manifest's output directory.
std::string corpus_path(const std::string& out_root, const ExperimentManifest& m);
std::string checkpoint_path(const std::string& out_root, const ExperimentManifest& m);
std::string manifest_out_dir(const std::string& out_root, const ExperimentManifest& m);

}  // namespace ordlab
