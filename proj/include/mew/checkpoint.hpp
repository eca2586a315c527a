#pragma once

// Model checkpoint (`.mew`).
//
// Layout, all little-endian:
//   offset  size  field
//   0       4     magic "MEWC"
//   4       4     u32 format version (1)
//   8       4     u32 metadata length L
//   12      L     UTF-8 JSON metadata: "model" (dims, flags, fusion,
//                 activation, pooling, tasks), "blocks" (name, offset,
//                 rows, cols of every parameter block), plus any extra
//                 sections the writer supplies (build settings, training
//                 config, best epoch)
//   12+L    8     u64 parameter count P
//   20+L    4P    parameters as f32, in block order
//   20+L+4P 8     u64 FNV-1a hash of every preceding byte

#include "mew/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace mew {

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  ModelParams params;
  nlohmann::json metadata;  // full metadata object, including "model" and "blocks"
};

/// `extra` must be an object; its keys are merged into the metadata.
std::string encode_checkpoint(const ModelParams& params, const nlohmann::json& extra = nlohmann::json::object());
/// Throws BadMagic, VersionMismatch, TruncatedFile or HashMismatch.
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                      const nlohmann::json& extra = nlohmann::json::object());
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace mew
