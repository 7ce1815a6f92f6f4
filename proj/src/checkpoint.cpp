#include "ordlab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace ordlab {

namespace {

constexpr char kMagic[8] = {'O', 'L', 'A', 'B', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ArtifactError("checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    uint32_t len = read_pod<uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw ArtifactError("checkpoint: truncated string");
    return s;
}

}  // namespace

void save_model(const Model& model, const std::string& path, const std::string& manifest_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("save_model: cannot open " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(out, kVersion);
    const ModelConfig& c = model.config;
    write_pod<uint32_t>(out, static_cast<uint32_t>(c.arch));
    write_pod<int32_t>(out, c.n_layers);
    write_pod<int32_t>(out, c.n_heads);
    write_pod<int32_t>(out, c.d_model);
    write_pod<int32_t>(out, c.d_ff);
    write_pod<int32_t>(out, c.vocab_size);
    write_pod<int32_t>(out, c.max_seq);
    write_pod<uint64_t>(out, c.seed);
    write_string(out, manifest_hash);

    auto tensors = named_tensors(model);
    write_pod<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        write_string(out, name);
        write_pod<uint32_t>(out, static_cast<uint32_t>(t->shape.size()));
        for (size_t d : t->shape) write_pod<uint64_t>(out, static_cast<uint64_t>(d));
        out.write(reinterpret_cast<const char*>(t->values.data()),
                  static_cast<std::streamsize>(t->values.size() * sizeof(double)));
    }
    if (!out) throw ArtifactError("save_model: write failed for " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("load_model: missing checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ArtifactError("load_model: bad magic in " + path);
    uint32_t version = read_pod<uint32_t>(in);
    if (version != kVersion)
        throw ArtifactError("load_model: unsupported format version " + std::to_string(version));

    ModelConfig c;
    c.arch = static_cast<Architecture>(read_pod<uint32_t>(in));
    c.n_layers = read_pod<int32_t>(in);
    c.n_heads = read_pod<int32_t>(in);
    c.d_model = read_pod<int32_t>(in);
    c.d_ff = read_pod<int32_t>(in);
    c.vocab_size = read_pod<int32_t>(in);
    c.max_seq = read_pod<int32_t>(in);
    c.seed = read_pod<uint64_t>(in);

    LoadedModel loaded;
    loaded.manifest_hash = read_string(in);
    loaded.model = init_model(c);  // same shapes; values overwritten below

    auto tensors = named_tensors(loaded.model);
    uint32_t count = read_pod<uint32_t>(in);
    if (count != tensors.size())
        throw ArtifactError("load_model: tensor count mismatch in " + path);
    for (auto& [name, t] : tensors) {
        std::string got = read_string(in);
        if (got != name)
            throw ArtifactError("load_model: expected tensor '" + name + "', found '" + got + "'");
        uint32_t rank = read_pod<uint32_t>(in);
        if (rank != t->shape.size()) throw ArtifactError("load_model: rank mismatch for " + name);
        for (size_t d = 0; d < rank; ++d) {
            uint64_t dim = read_pod<uint64_t>(in);
            if (dim != t->shape[d]) throw ArtifactError("load_model: dim mismatch for " + name);
        }
        in.read(reinterpret_cast<char*>(t->values.data()),
                static_cast<std::streamsize>(t->values.size() * sizeof(double)));
        if (!in) throw ArtifactError("load_model: truncated tensor data for " + name);
    }
    return loaded;
}

}  // namespace ordlab
