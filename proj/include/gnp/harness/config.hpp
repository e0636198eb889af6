#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gnp/data.hpp"
#include "gnp/flatness.hpp"
#include "gnp/mlp.hpp"
#include "gnp/penalty.hpp"

namespace gnp::harness {

enum class Scheme { kStandard, kSam, kGnp };

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme s);

/// Everything one training run depends on.
struct RunConfig {
  std::string name;
  Scheme scheme = Scheme::kGnp;
  GnpConfig optim = GnpConfig::with_alpha(0.8);
  int epochs = 50;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  /// Dataset seed; follows `seed` when unset.
  std::optional<std::uint64_t> data_seed;
  DatasetSpec dataset;
  ModelSpec model;
  bool probe = true;
  ProbeConfig probe_cfg;
  /// Records wall_ms as 0 so that repeated runs serialize identically.
  bool deterministic = false;

  /// Throws ConfigError on any inconsistency.
  void validate() const;
  DatasetSpec resolved_dataset() const;
  ModelSpec resolved_model() const;
};

/// Ordered key/value pairs as read from a config file or the command line.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; `#` starts a comment. Throws ConfigError with the
/// line number on malformed input.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

/// Applies `file` then `flags` on top of the defaults. Within one layer,
/// giving both alpha and lambda is an error; a flag setting one of them
/// replaces whichever the file set.
RunConfig build_config(const KeyValues& file, const KeyValues& flags = {});
/// Applies one key; throws ConfigError for unknown keys or bad values.
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Canonical sorted `key=value` lines describing the run. Two configs with
/// the same canonical text train identically.
std::string canonical_text(const RunConfig& cfg);
std::map<std::string, std::string> to_key_values(const RunConfig& cfg);
/// 64-bit FNV-1a of canonical_text, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Root for run outputs: $GNP_OUTPUT_DIR, else ./runs.
inline constexpr const char* kOutputEnv = "GNP_OUTPUT_DIR";
std::filesystem::path output_root();

/// Shortest text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& key, const std::string& text);
std::int64_t parse_int(const std::string& key, const std::string& text);
bool parse_bool(const std::string& key, const std::string& text);

}  // namespace gnp::harness
