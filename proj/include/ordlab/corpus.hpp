#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ordlab/vocab.hpp"

namespace ordlab {

// One key->value binding in a sample's context.
struct Fact {
    int key;    // index into the key alphabet
    int value;  // index into the value alphabet
};

struct SampleMeta {
    int n_facts = 0;
    char answer_position = 'A';  // 'A'..'D'
};

// A synthetic MCQA instance. The answer is derivable only from the context:
// the correct option is the value bound to query_key, and the distractors are
// values bound to other keys of the same context, so option priors carry no
// signal.
struct Sample {
    std::vector<Fact> facts;
    int query_key = 0;
    std::vector<int> options;  // 4 value indices, distinct
    int answer_idx = 0;        // 0..3
    SampleMeta meta;
};

struct CorpusConfig {
    size_t n_samples = 1000;
    std::vector<int> n_facts_choices = {4, 8, 12};  // context-length buckets
    int n_options = 4;
    std::vector<double> answer_position_weights = {1.0, 1.0, 1.0, 1.0};
    uint64_t seed = 0;
    // Alphabet sizes; must satisfy the capacity preconditions below.
    int n_keys = 16;
    int n_values = 16;
};

struct PositionStats {
    std::vector<size_t> counts;  // per label
    double chi_square = 0.0;
    double p_value = 1.0;
};

// Deterministic given config. Per-sample RNG streams derive from
// (seed, sample index), so generation order never matters.
std::vector<Sample> gen_corpus(const CorpusConfig& config);

// Best fixed-guess accuracy: max weight / sum of weights.
double chance_accuracy(const CorpusConfig& config);

// Chi-square goodness-of-fit of realized answer positions against the
// configured weights; the p-value is recorded in the gen manifest record.
PositionStats corpus_position_stats(const std::vector<Sample>& samples,
                                    const CorpusConfig& config);

// Line-delimited records; field order is fixed so serialization is
// bit-identical for identical corpora.
std::string sample_to_line(const Sample& s);
Sample sample_from_line(const std::string& line);
void save_corpus(const std::vector<Sample>& samples, const std::string& path);
std::vector<Sample> load_corpus(const std::string& path);

// FNV-1a over the serialized corpus; identifies a corpus in EvalReports.
uint64_t corpus_fingerprint(const std::vector<Sample>& samples);

// Deterministic train/held-out split by sample id: ids with id % 5 == 4 are
// held out (20%).
bool is_heldout_id(size_t sample_id);

}  // namespace ordlab
