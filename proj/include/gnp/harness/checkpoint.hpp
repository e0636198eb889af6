#pragma once

#include <filesystem>
#include <string>

#include "gnp/param_vector.hpp"
#include "json.hpp"

namespace gnp::harness {

/// File layout:
///   8 bytes   magic "GNPCKPT1"
///   8 bytes   header length N, little-endian u64
///   N bytes   JSON header {"segments": [{name, shape, offset}], "count", "meta"}
///   8*count   parameter values, little-endian IEEE-754 binary64
struct Checkpoint {
  ParamVector params;
  nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const ParamVector& params,
                     const nlohmann::json& meta = nlohmann::json::object());
/// Throws IoError on a missing, truncated or inconsistent file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const ParamVector& params, const nlohmann::json& meta);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace gnp::harness
