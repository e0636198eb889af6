#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gnp/flatness.hpp"
#include "gnp/harness/config.hpp"
#include "json.hpp"

namespace gnp::harness {

/// One metrics row. Epoch 0 describes the untrained model.
struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double test_error = 0.0;
  double grad_norm = 0.0;  // ||grad L|| over the full training set
  double lr = 0.0;
  double wall_ms = 0.0;
};

struct Outcome {
  bool diverged = false;
  std::int64_t step = -1;  // optimizer step that went non-finite
  std::string where;

  std::string label() const;  // "converged" or "diverged(<step>)"
};

struct RunRecord {
  RunConfig config;
  std::vector<EpochRow> rows;
  std::optional<FlatnessReport> flatness;
  Outcome outcome;
  bool experimental = false;  // alpha outside [0, 1]
  std::string params_hash;    // FNV-1a of the final parameter bytes

  const EpochRow& final_row() const { return rows.back(); }
};

nlohmann::json to_json(const FlatnessReport& r);
FlatnessReport flatness_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& j);

/// Header "epoch,train_loss,test_error,grad_norm,lr,wall_ms".
std::string metrics_csv(const RunRecord& record);

/// Same trajectory, flatness, outcome and final parameters; wall_ms and the
/// config snapshot are ignored.
bool same_trajectory(const RunRecord& a, const RunRecord& b);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace gnp::harness
