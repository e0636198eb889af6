#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gnp/harness/config.hpp"
#include "gnp/harness/run_record.hpp"

namespace gnp::harness {

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

/// Base config plus named axes; every cell of the cartesian product is run
/// once per seed. Sweep files use the run keys for the base and
///   sweep.name, sweep.seeds, sweep.cap, sweep.workers, sweep.axis.<key>
/// for the rest. Axis values are comma lists or start:stop:step ranges.
struct SweepSpec {
  std::string name = "sweep";
  KeyValues base;
  std::vector<SweepAxis> axes;
  std::vector<std::uint64_t> seeds{0};
  std::size_t cap = 1000;
  int workers = 1;

  std::size_t cell_count() const;
  std::size_t run_count() const { return cell_count() * seeds.size(); }
  /// Throws ConfigError when the spec is empty, over the cap, or a cell
  /// config fails validation.
  void validate() const;
};

SweepSpec parse_sweep(const KeyValues& kv);
/// "0:1:0.25" -> 0, 0.25, 0.5, 0.75, 1; anything else splits on commas.
std::vector<std::string> expand_axis_values(const std::string& text);

struct SweepCell {
  std::vector<std::pair<std::string, std::string>> coords;
  std::string label() const;  // "alpha=0.5;r=0.05"
};

std::vector<SweepCell> sweep_cells(const SweepSpec& spec);
RunConfig cell_config(const SweepSpec& spec, const SweepCell& cell, std::uint64_t seed);

struct CellSummary {
  SweepCell cell;
  std::vector<double> test_errors;  // one per seed, in seed order
  int diverged = 0;
  double mean_test_error = 0.0;
  double std_test_error = 0.0;  // sample standard deviation
  double sem_test_error = 0.0;  // std / sqrt(n)
  double mean_train_loss = 0.0;
};

struct SweepOptions {
  std::filesystem::path out_dir;  // defaults to output_root() / name
  /// Stop after this many newly trained runs (negative: no limit). Used to
  /// simulate an interruption.
  int max_new_runs = -1;
  std::function<void(const std::string&)> log;
};

struct SweepResult {
  bool complete = false;
  int trained = 0;  // runs trained by this invocation
  int reused = 0;   // runs found complete on disk
  std::vector<RunRecord> records;  // cell-major, seed-minor; complete sweeps only
  std::vector<CellSummary> summary;
  std::filesystem::path tidy_csv;
  std::filesystem::path summary_csv;
};

/// Runs every missing cell-seed (resuming from records already on disk),
/// then aggregates in cell order and writes tidy.csv and summary.csv.
/// Diverged runs stay in the tables with their last finite test error.
SweepResult run_sweep(const SweepSpec& spec, const SweepOptions& opts = {});

std::vector<CellSummary> summarize(const SweepSpec& spec, const std::vector<RunRecord>& records);
std::string tidy_csv(const SweepSpec& spec, const std::vector<RunRecord>& records);
std::string summary_csv(const SweepSpec& spec, const std::vector<CellSummary>& summary);

}  // namespace gnp::harness
