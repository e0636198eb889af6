// gnp: train, sweep, verify and probe from the command line.
//
// Exit status: 0 success, 1 verify failure, 2 diverged run, 3 interrupted
// sweep, 64 bad configuration, 74 I/O error, 70 anything else.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gnp/error.hpp"
#include "gnp/flatness.hpp"
#include "gnp/harness/config.hpp"
#include "gnp/harness/probe.hpp"
#include "gnp/harness/run_record.hpp"
#include "gnp/harness/sweep.hpp"
#include "gnp/harness/train.hpp"
#include "gnp/harness/verify.hpp"

namespace {

using namespace gnp;
using namespace gnp::harness;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitIncomplete = 3;
constexpr int kExitConfig = 64;
constexpr int kExitInternal = 70;
constexpr int kExitIo = 74;

// Named flags that map onto config keys; they are applied after --set.
struct OverrideFlags {
  std::vector<std::string> sets;
  std::optional<std::string> scheme, schedule, dataset;
  std::optional<double> alpha, lambda, r, lr, momentum, weight_decay;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--set", sets, "Config override key=value (repeatable)");
    app->add_option("--scheme", scheme, "standard, sam or gnp");
    app->add_option("--alpha", alpha, "Balance coefficient");
    app->add_option("--lambda", lambda, "Penalty coefficient");
    app->add_option("--r", r, "Perturbation radius");
    app->add_option("--lr", lr, "Learning rate");
    app->add_option("--momentum", momentum, "Momentum");
    app->add_option("--weight-decay", weight_decay, "Decoupled weight decay");
    app->add_option("--schedule", schedule, "constant or cosine");
    app->add_option("--epochs", epochs, "Epochs");
    app->add_option("--seed", seed, "Run seed");
    app->add_option("--dataset", dataset, "two_moons, gaussian_blobs, spirals or idx_files");
  }

  KeyValues key_values() const {
    KeyValues kv;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    const auto num = [&](const char* k, const std::optional<double>& v) {
      if (v) kv.emplace_back(k, format_double(*v));
    };
    if (scheme) kv.emplace_back("scheme", *scheme);
    num("alpha", alpha);
    num("lambda", lambda);
    num("r", r);
    num("lr", lr);
    num("momentum", momentum);
    num("weight_decay", weight_decay);
    if (schedule) kv.emplace_back("schedule", *schedule);
    if (epochs) kv.emplace_back("epochs", std::to_string(*epochs));
    if (seed) kv.emplace_back("seed", std::to_string(*seed));
    if (dataset) kv.emplace_back("dataset", *dataset);
    return kv;
  }
};

int cmd_train(const std::string& config_path, const OverrideFlags& flags, std::string out_dir,
              bool quiet) {
  const KeyValues file = config_path.empty() ? KeyValues{} : read_key_values(config_path);
  const RunConfig cfg = build_config(file, flags.key_values());
  if (cfg.optim.experimental()) {
    std::fprintf(stderr, "note: alpha = %s is outside [0, 1]; the run is flagged experimental\n",
                 format_double(cfg.optim.balance()).c_str());
  }
  const auto on_epoch = [&](const EpochRow& row) {
    if (quiet) return;
    std::fprintf(stderr, "epoch %4d  loss %.6g  test_error %.4f  grad_norm %.4e  lr %.4g\n",
                 row.epoch, row.train_loss, row.test_error, row.grad_norm, row.lr);
  };
  const TrainResult result = train_run(cfg, on_epoch);
  if (out_dir.empty()) {
    out_dir = (output_root() / (cfg.name.empty() ? config_hash(cfg) : cfg.name)).string();
  }
  const RunFiles files = write_run(result, out_dir);
  std::printf("%s %s\n", result.record.outcome.label().c_str(), files.record.string().c_str());
  return result.record.outcome.diverged ? kExitDiverged : kExitOk;
}

int cmd_sweep(const std::string& spec_path, const OverrideFlags& flags, const std::string& out_dir,
              std::optional<int> workers, int limit, bool quiet) {
  KeyValues kv = read_key_values(spec_path);
  for (const auto& entry : flags.key_values()) kv.push_back(entry);
  SweepSpec spec = parse_sweep(kv);
  if (workers) {
    spec.workers = *workers;
    spec.validate();
  }
  SweepOptions opts;
  opts.out_dir = out_dir;
  opts.max_new_runs = limit;
  if (!quiet) opts.log = [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); };
  const SweepResult res = run_sweep(spec, opts);
  std::fprintf(stderr, "trained %d, reused %d of %zu runs\n", res.trained, res.reused,
               spec.run_count());
  if (!res.complete) {
    std::fprintf(stderr, "sweep incomplete; rerun the same command to resume\n");
    return kExitIncomplete;
  }
  std::printf("%s", summary_csv(spec, res.summary).c_str());
  std::fprintf(stderr, "wrote %s and %s\n", res.tidy_csv.string().c_str(),
               res.summary_csv.string().c_str());
  return kExitOk;
}

int cmd_verify(std::string report_path) {
  VerifyOptions opts;
  opts.on_check = [](const CheckResult& c) {
    std::printf("%s %-28s measured %-12.4g %s %g\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                c.measured, c.comparison.c_str(), c.tolerance);
    std::fflush(stdout);
  };
  const VerifyReport report = run_verify(opts);
  if (report_path.empty()) report_path = (output_root() / "verify.json").string();
  write_text(report_path, to_json(report).dump(2) + "\n");
  std::printf("%s in %.1f s, report %s\n", report.passed() ? "all checks passed" : "FAILED",
              report.seconds, report_path.c_str());
  return report.passed() ? kExitOk : kExitCheckFailed;
}

int cmd_probe(const std::string& checkpoint, const ProbeConfig& probe, const std::string& out) {
  const FlatnessReport rep = probe_checkpoint(checkpoint, probe);
  const std::string text = to_json(rep).dump(2) + "\n";
  if (!out.empty()) write_text(out, text);
  std::printf("%s", text.c_str());
  return kExitOk;
}

int cmd_double_well(double alpha, double r, double lo, double hi, int points,
                    const std::string& out) {
  const DoubleWell landscape;
  std::vector<double> grid;
  for (int i = 0; i < points; ++i) {
    grid.push_back(points == 1 ? lo : lo + (hi - lo) * i / (points - 1));
  }
  const DoubleWellResult res =
      double_well_experiment(landscape, GnpConfig::with_alpha(alpha, r), grid, DoubleWellRun{});
  const std::string csv = double_well_csv(res);
  if (!out.empty()) write_text(out, csv);
  std::printf("%s", csv.c_str());
  std::fprintf(stderr, "standard: flat %d sharp %d diverged %d; gnp: flat %d sharp %d diverged %d\n",
               res.standard.flat_count, res.standard.sharp_count, res.standard.diverged_count,
               res.gnp.flat_count, res.gnp.sharp_count, res.gnp.diverged_count);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient norm penalty toolkit"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train one run and write its record, metrics and checkpoint");
  std::string train_config, train_out;
  bool train_quiet = false;
  OverrideFlags train_flags;
  train->add_option("-c,--config", train_config, "key=value config file")->check(CLI::ExistingFile);
  train->add_option("-o,--out", train_out, "Output directory");
  train->add_flag("-q,--quiet", train_quiet, "No per-epoch log");
  train_flags.attach(train);

  auto* sweep = app.add_subcommand("sweep", "Run a resumable parameter sweep");
  std::string sweep_spec, sweep_out;
  std::optional<int> sweep_workers;
  int sweep_limit = -1;
  bool sweep_quiet = false;
  OverrideFlags sweep_flags;
  sweep->add_option("spec", sweep_spec, "Sweep file")->required()->check(CLI::ExistingFile);
  sweep->add_option("-o,--out", sweep_out, "Output directory");
  sweep->add_option("-j,--workers", sweep_workers, "Parallel runs");
  sweep->add_option("--limit", sweep_limit, "Stop after this many new runs");
  sweep->add_flag("-q,--quiet", sweep_quiet, "No per-run log");
  sweep_flags.attach(sweep);

  auto* verify = app.add_subcommand("verify", "Run the oracle and invariant checks");
  std::string verify_report;
  verify->add_option("-r,--report", verify_report, "JSON report path");

  auto* probe = app.add_subcommand("probe", "Flatness of a checkpoint, or the double-well experiment");
  std::string probe_ckpt, probe_out;
  ProbeConfig probe_cfg;
  bool double_well = false;
  double dw_alpha = 0.8, dw_r = 0.3, dw_lo = -0.3, dw_hi = 0.13;
  int dw_points = 21;
  probe->add_option("checkpoint", probe_ckpt, "Checkpoint file")->check(CLI::ExistingFile);
  probe->add_option("-o,--out", probe_out, "Write the report here as well");
  probe->add_option("--rho", probe_cfg.rho, "Ball radius");
  probe->add_option("--samples", probe_cfg.n_samples, "Random ball samples");
  probe->add_option("--seed", probe_cfg.seed, "Probe seed");
  probe->add_option("--ascent-steps", probe_cfg.ascent_steps, "Projected ascent iterations");
  probe->add_option("--power-iters", probe_cfg.power_iters, "Power iterations");
  probe->add_flag("--double-well", double_well, "Run the double-well basin experiment (CSV)");
  probe->add_option("--alpha", dw_alpha, "Double-well balance coefficient");
  probe->add_option("--r", dw_r, "Double-well perturbation radius");
  probe->add_option("--grid-lo", dw_lo, "First initial point");
  probe->add_option("--grid-hi", dw_hi, "Last initial point");
  probe->add_option("--grid-points", dw_points, "Number of initial points")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_config, train_flags, train_out, train_quiet);
    if (sweep->parsed()) {
      return cmd_sweep(sweep_spec, sweep_flags, sweep_out, sweep_workers, sweep_limit, sweep_quiet);
    }
    if (verify->parsed()) return cmd_verify(verify_report);
    if (probe->parsed()) {
      if (double_well) return cmd_double_well(dw_alpha, dw_r, dw_lo, dw_hi, dw_points, probe_out);
      if (probe_ckpt.empty()) throw ConfigError("probe needs a checkpoint or --double-well");
      return cmd_probe(probe_ckpt, probe_cfg, probe_out);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
