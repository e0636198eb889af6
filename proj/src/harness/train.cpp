#include "gnp/harness/train.hpp"

#include <chrono>
#include <cstdio>

#include "gnp/error.hpp"
#include "gnp/harness/checkpoint.hpp"
#include "gnp/mlp.hpp"
#include "gnp/objective.hpp"
#include "gnp/rng.hpp"

namespace gnp::harness {

namespace {

struct Evaluation {
  double train_loss = 0.0;
  double grad_norm = 0.0;
  double test_error = 0.0;
};

Evaluation evaluate(const ModelSpec& model, const ParamVector& params, const Dataset& data) {
  const LossGrad lg = MlpObjective(model, data.train).loss_and_gradient(params);
  if (!std::isfinite(lg.loss) || !lg.grad.all_finite()) throw DivergenceError("evaluation");
  return {lg.loss, l2_norm(lg.grad), error_rate(model, params, data.test)};
}

}  // namespace

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, int epoch) {
  return mix_seed(mix_seed(seed, 0x5348), static_cast<std::uint64_t>(epoch));
}

std::size_t steps_per_epoch(const RunConfig& cfg, std::size_t train_size) {
  return (train_size + cfg.batch_size - 1) / cfg.batch_size;
}

std::string params_hash(const ParamVector& params) {
  const auto v = params.values();
  const std::uint64_t h = fnv1a(v.data(), v.size() * sizeof(double));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainResult train_run(const RunConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&]() {
    if (cfg.deterministic) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  };

  const Dataset data = generate_dataset(cfg.resolved_dataset());
  const ModelSpec model = cfg.resolved_model();
  if (data.train.features() != model.inputs() || data.num_classes != model.classes()) {
    throw ConfigError("model layers do not match the dataset (" +
                      std::to_string(data.train.features()) + " features, " +
                      std::to_string(data.num_classes) + " classes)");
  }

  const std::size_t n = data.train.size();
  const std::size_t per_epoch = steps_per_epoch(cfg, n);
  GnpConfig optim = cfg.optim;
  optim.total_steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(per_epoch) * cfg.epochs);

  TrainResult out;
  out.record.config = cfg;
  out.record.experimental = optim.experimental();
  OptimState state = OptimState::start(init_params(model));

  const auto push_row = [&](int epoch, double lr) {
    const Evaluation ev = evaluate(model, state.params, data);
    EpochRow row{epoch, ev.train_loss, ev.test_error, ev.grad_norm, lr, elapsed_ms()};
    out.record.rows.push_back(row);
    if (on_epoch) on_epoch(row);
  };

  try {
    push_row(0, scheduled_lr(0, optim));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      double lr = 0.0;
      for (const auto& idx : batch_indices(n, cfg.batch_size, epoch_shuffle_seed(cfg.seed, epoch))) {
        const Batch batch = data.train.select(idx);
        StepResult res = train_step(state, MlpObjective(model, batch), optim);
        lr = res.lr;
        state = std::move(res.state);
      }
      push_row(epoch, lr);
    }
  } catch (const DivergenceError& e) {
    out.record.outcome.diverged = true;
    out.record.outcome.step = e.step() >= 0 ? e.step() : state.step;
    out.record.outcome.where = e.where();
  }

  if (!out.record.outcome.diverged && cfg.probe) {
    out.record.flatness = probe_flatness(MlpObjective(model, data.train), state.params, cfg.probe_cfg);
  }
  out.record.params_hash = params_hash(state.params);
  out.params = std::move(state.params);
  return out;
}

RunFiles run_files(const std::filesystem::path& dir) {
  return {dir / "record.json", dir / "metrics.csv", dir / "params.ckpt"};
}

RunFiles write_run(const TrainResult& result, const std::filesystem::path& dir) {
  const RunFiles files = run_files(dir);
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["config"] = to_key_values(result.record.config);
  meta["outcome"] = result.record.outcome.label();
  save_checkpoint(files.checkpoint, result.params, meta);
  write_text(files.metrics, metrics_csv(result.record));
  // The record goes last: its presence marks the run as complete.
  write_text(files.record, to_json(result.record).dump(2) + "\n");
  return files;
}

}  // namespace gnp::harness
