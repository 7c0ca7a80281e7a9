#include "lgnn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "lgnn/error.hpp"

namespace lgnn {

namespace {

constexpr char kMagic[8] = {'L', 'G', 'N', 'N', 'C', 'K', 'P', 'T'};

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char bytes[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ParseError("checkpoint truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

std::string read_string(std::istream& is, std::uint32_t len) {
    std::string s(len, '\0');
    if (len > 0 && !is.read(s.data(), len)) throw ParseError("checkpoint truncated");
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParams& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(os, kCheckpointVersion);
    const std::string header = to_json(config);
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(header.size()));
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    const auto arrays = params.parameters();
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(arrays.size()));
    for (const Parameter* p : arrays) {
        write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_le<std::uint64_t>(os, p->value.rows());
        write_le<std::uint64_t>(os, p->value.cols());
        for (const double v : p->value.data()) write_le<double>(os, v);
    }
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("not a checkpoint file: " + path.string());
    }
    const auto version = read_le<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw SchemaError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.config = model_config_from_json(read_string(is, read_le<std::uint32_t>(is)));

    std::map<std::string, Tensor> arrays;
    const auto count = read_le<std::uint32_t>(is);
    for (std::uint32_t a = 0; a < count; ++a) {
        std::string name = read_string(is, read_le<std::uint32_t>(is));
        const auto rows = read_le<std::uint64_t>(is);
        const auto cols = read_le<std::uint64_t>(is);
        Tensor t(rows, cols);
        for (double& v : t.data()) v = read_le<double>(is);
        arrays.emplace(std::move(name), std::move(t));
    }

    // Rebuild the parameter skeleton from the config, then fill it by name.
    Rng unused(0);
    ckpt.params = init_params(ckpt.config, unused);
    auto slots = ckpt.params.parameters();
    if (slots.size() != arrays.size()) {
        throw SchemaError("checkpoint holds " + std::to_string(arrays.size()) + " arrays, config implies " +
                          std::to_string(slots.size()));
    }
    for (Parameter* p : slots) {
        auto it = arrays.find(p->name);
        if (it == arrays.end()) throw SchemaError("checkpoint is missing parameter " + p->name);
        if (!it->second.same_shape(p->value)) {
            throw SchemaError("checkpoint parameter " + p->name + " has shape " + it->second.shape_string() +
                              ", expected " + p->value.shape_string());
        }
        p->value = std::move(it->second);
        p->zero_grad();
    }
    return ckpt;
}

}  // namespace lgnn
