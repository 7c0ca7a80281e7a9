#pragma once

#include <filesystem>

#include "lgnn/network.hpp"

namespace lgnn {

/// Binary checkpoint layout (all integers and doubles little-endian):
///
///   magic        8 bytes  "LGNNCKPT"
///   version      u32      currently 1
///   config_len   u32      length of the JSON model-config header
///   config       bytes    UTF-8 JSON, see to_json(ModelConfig)
///   count        u32      number of parameter arrays
///   per array:   u32 name_len, name bytes, u64 rows, u64 cols, rows*cols f64
///
/// docs/checkpoint_format.md carries the same description.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lgnn
