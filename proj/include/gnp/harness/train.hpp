#pragma once

#include <filesystem>
#include <functional>

#include "gnp/harness/config.hpp"
#include "gnp/harness/run_record.hpp"
#include "gnp/param_vector.hpp"

namespace gnp::harness {

struct TrainResult {
  RunRecord record;
  ParamVector params;  // final parameters, or the last finite ones on divergence
};

using EpochCallback = std::function<void(const EpochRow&)>;

/// Trains to completion or divergence. Divergence is recorded in the outcome,
/// not thrown; config and IO problems throw.
TrainResult train_run(const RunConfig& cfg, const EpochCallback& on_epoch = {});

struct RunFiles {
  std::filesystem::path record;      // record.json
  std::filesystem::path metrics;     // metrics.csv
  std::filesystem::path checkpoint;  // params.ckpt
};

RunFiles run_files(const std::filesystem::path& dir);
/// Writes the record, metrics CSV and checkpoint into `dir`.
RunFiles write_run(const TrainResult& result, const std::filesystem::path& dir);

/// Seed of the minibatch shuffle in `epoch` (1-based).
std::uint64_t epoch_shuffle_seed(std::uint64_t seed, int epoch);
std::size_t steps_per_epoch(const RunConfig& cfg, std::size_t train_size);

/// FNV-1a of the raw parameter bytes, as 16 hex digits.
std::string params_hash(const ParamVector& params);

}  // namespace gnp::harness
