#pragma once

#include <string>

#include "ordlab/model.hpp"

namespace ordlab {

// Binary checkpoint, format version 1:
//   magic "OLABCKP1", u32 version,
//   u32 arch, i32 n_layers/n_heads/d_model/d_ff/vocab_size/max_seq, u64 seed,
//   u32 manifest-hash length + bytes,
//   u32 tensor count, then per tensor:
//     u32 name length, name bytes, u32 rank, u64 dims[rank],
//     little-endian IEEE-754 doubles.
// Round-trips are bit-exact.
void save_model(const Model& model, const std::string& path,
                const std::string& manifest_hash = "");

struct LoadedModel {
    Model model;
    std::string manifest_hash;
};

LoadedModel load_model(const std::string& path);

}  // namespace ordlab
