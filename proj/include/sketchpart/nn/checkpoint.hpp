#pragma once

#include <filesystem>
#include <iosfwd>

#include "json.hpp"
#include "sketchpart/nn/parameters.hpp"

namespace sketchpart::nn {

inline constexpr int kCheckpointFormatVersion = 1;

/// Checkpoint byte layout (all integers little-endian):
///
///   8 bytes   magic "SKPCKPT1"
///   u64       header length H
///   H bytes   UTF-8 JSON header {"format_version", "model_config", ...}
///   u64       tensor count N
///   N times:
///     u32     name length L, then L bytes of name
///     u32     rank R, then R x u64 extents
///     prod(extents) x f64 (IEEE-754 binary64)
struct Checkpoint {
  nlohmann::json header;
  ParameterStore parameters;
};

void write_checkpoint(std::ostream& out, const nlohmann::json& model_config, const ParameterStore& params,
                      const nlohmann::json& extra = nlohmann::json::object());
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& model_config,
                     const ParameterStore& params, const nlohmann::json& extra = nlohmann::json::object());

Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sketchpart::nn
