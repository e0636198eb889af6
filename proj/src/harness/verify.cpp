#include "gnp/harness/verify.hpp"

#include <chrono>
#include <cmath>

#include "gnp/error.hpp"
#include "gnp/harness/train.hpp"
#include "gnp/mlp.hpp"
#include "gnp/objective.hpp"
#include "gnp/oracle.hpp"
#include "gnp/rng.hpp"

namespace gnp::harness {

namespace {

using oracle::QuadraticProblem;

struct Fixture {
  ModelSpec model;
  Batch batch;
};

ModelSpec spec(std::vector<std::size_t> sizes, Activation act, InitScheme init, std::uint64_t seed) {
  ModelSpec m;
  m.layer_sizes = std::move(sizes);
  m.activation = act;
  m.init = init;
  m.seed = seed;
  return m;
}

Batch gaussian_batch(std::size_t rows, std::size_t features, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<int> label(0, classes - 1);
  Tensor x({rows, features});
  std::vector<int> y(rows);
  for (double& v : x.values()) v = gauss(rng);
  for (int& v : y) v = label(rng);
  return Batch{std::move(x), std::move(y)};
}

std::vector<Fixture> gradient_fixtures() {
  std::vector<Fixture> f;
  f.push_back({spec({3, 4, 2}, Activation::kTanh, InitScheme::kGlorot, 1), gaussian_batch(8, 3, 2, 11)});
  f.push_back({spec({2, 8, 2}, Activation::kRelu, InitScheme::kHe, 2), gaussian_batch(16, 2, 2, 12)});
  f.push_back({spec({4, 6, 5, 3}, Activation::kTanh, InitScheme::kHe, 3), gaussian_batch(12, 4, 3, 13)});
  f.push_back({spec({2, 5, 5, 2}, Activation::kRelu, InitScheme::kGlorot, 4), gaussian_batch(10, 2, 2, 14)});
  f.push_back({spec({3, 7, 4}, Activation::kTanh, InitScheme::kGlorot, 5), gaussian_batch(20, 3, 4, 15)});
  return f;
}

// Unit vector of the given layout.
ParamVector random_direction(const ParamVector& like, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss;
  ParamVector v = ParamVector::zeros_like(like);
  for (double& x : v.values()) x = gauss(rng);
  v *= 1.0 / l2_norm(v);
  return v;
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (std::log(xs[i]) - mx) * (std::log(ys[i]) - my);
    den += (std::log(xs[i]) - mx) * (std::log(xs[i]) - mx);
  }
  return num / den;
}

CheckResult at_most(std::string name, std::string description, double measured, double tol) {
  return {std::move(name), std::move(description), measured, tol, "<=", measured <= tol, nlohmann::json::object()};
}

CheckResult at_least(std::string name, std::string description, double measured, double tol) {
  return {std::move(name), std::move(description), measured, tol, ">=", measured >= tol, nlohmann::json::object()};
}

// Penalized gradient assembled from the two passes with the rule under test.
ParamVector combined(const Objective& obj, const ParamVector& theta, const GnpConfig& cfg,
                     const CombineFn& combine) {
  const GradientReport rep = gnp_gradient(obj, theta, cfg);
  return combine(rep.g1, rep.g2, cfg.balance());
}

CheckResult check_gradients() {
  double worst = 0.0;
  nlohmann::json per = nlohmann::json::array();
  for (const Fixture& f : gradient_fixtures()) {
    const ParamVector theta = init_params(f.model);
    const MlpObjective obj(f.model, f.batch);
    const double err = oracle::max_coordinate_relative_error(obj.gradient(theta),
                                                             oracle::fd_gradient(obj, theta, 1e-6));
    per.push_back(err);
    worst = std::max(worst, err);
  }
  CheckResult c = at_most("gradient_check",
                          "autodiff vs central differences, max per-coordinate relative error "
                          "over 5 model/batch fixtures",
                          worst, 1e-5);
  c.detail["per_fixture"] = per;
  return c;
}

CheckResult check_hvp_order() {
  const ModelSpec m = spec({2, 6, 2}, Activation::kTanh, InitScheme::kGlorot, 7);
  const Batch b = gaussian_batch(16, 2, 2, 17);
  const MlpObjective obj(m, b);
  const ParamVector theta = init_params(m);
  const ParamVector v = random_direction(theta, 27);
  const ParamVector truth = oracle::fd_hvp(obj, theta, v);
  const std::vector<double> rs{0.1, 0.05, 0.02, 0.01};
  std::vector<double> errs;
  for (double r : rs) errs.push_back(l2_norm(sub(hvp_taylor(obj, theta, v, r), truth)));
  CheckResult c = at_least("hvp_taylor_order",
                           "log-log slope of the one-sided Taylor Hessian-product error against r",
                           loglog_slope(rs, errs), 0.8);
  c.detail["r"] = rs;
  c.detail["error"] = errs;
  return c;
}

CheckResult check_quadratic_exactness(const CombineFn& combine) {
  std::vector<std::pair<QuadraticProblem, ParamVector>> problems;
  problems.emplace_back(QuadraticProblem::diagonal({1.0, 4.0}), ParamVector::flat({1.0, 1.0}));
  problems.emplace_back(QuadraticProblem::with_spectrum({0.2, 1.0, 2.5, 9.0}, 3),
                        ParamVector::flat({0.5, -1.0, 0.25, 2.0}));
  problems.emplace_back(QuadraticProblem::with_spectrum({1.0, 2.0, 3.0, 5.0, 8.0, 13.0}, 5),
                        ParamVector::flat({1.0, 0.0, -1.0, 0.5, 0.3, -0.2}));
  const double lambda = 0.08;
  double worst = 0.0;
  for (const auto& [q, theta] : problems) {
    const ParamVector exact = oracle::exact_penalized_gradient(q, theta, lambda);
    for (double r : {0.2, 0.1, 0.05, 0.01}) {
      const ParamVector g = combined(q, theta, GnpConfig::with_lambda(lambda, r), combine);
      worst = std::max(worst, oracle::relative_error(g, exact));
    }
  }
  const ParamVector anchor =
      oracle::exact_penalized_gradient(problems[0].first, problems[0].second, lambda);
  CheckResult c = at_most("quadratic_exactness",
                          "penalized step vs closed-form penalized gradient on 3 quadratics, "
                          "r in {0.2, 0.1, 0.05, 0.01}, max relative error",
                          worst, 1e-10);
  c.detail["diag14_exact"] = {anchor[0], anchor[1]};
  return c;
}

CheckResult check_order_r(const CombineFn& combine) {
  const ModelSpec m = spec({2, 6, 2}, Activation::kTanh, InitScheme::kGlorot, 5);
  const Batch b = gaussian_batch(12, 2, 2, 21);
  const MlpObjective obj(m, b);
  const ParamVector theta = init_params(m);
  const double lambda = 0.04;
  const ParamVector exact = oracle::exact_penalized_gradient(obj, theta, lambda);
  const std::vector<double> rs{0.1, 0.05, 0.02, 0.01};
  std::vector<double> errs;
  for (double r : rs) {
    errs.push_back(oracle::relative_error(combined(obj, theta, GnpConfig::with_lambda(lambda, r), combine), exact));
  }
  CheckResult c = at_least("order_r_consistency",
                           "log-log slope of penalized-step error against r with lambda fixed "
                           "on a tanh MLP",
                           loglog_slope(rs, errs), 0.8);
  c.detail["r"] = rs;
  c.detail["error"] = errs;
  return c;
}

CheckResult check_identity() {
  const ModelSpec m = spec({2, 8, 8, 2}, Activation::kTanh, InitScheme::kGlorot, 6);
  const Batch b = gaussian_batch(24, 2, 2, 31);
  const MlpObjective obj(m, b);
  const ParamVector base = init_params(m);
  double worst = 0.0;
  nlohmann::json per = nlohmann::json::array();
  for (std::uint64_t k = 0; k < 3; ++k) {
    ParamVector theta = base;
    if (k > 0) theta.axpy(0.5, random_direction(base, 40 + k));
    const double err = oracle::appendix_identity_check(obj, theta);
    per.push_back(err);
    worst = std::max(worst, err);
  }
  CheckResult c = at_most("norm_gradient_identity",
                          "finite-difference gradient of ||grad L|| vs H g / ||g|| at 3 points "
                          "of a 114-parameter MLP",
                          worst, 1e-4);
  c.detail["per_point"] = per;
  return c;
}

std::vector<CheckResult> check_reductions(const CombineFn& combine) {
  const ModelSpec m = spec({2, 12, 2}, Activation::kTanh, InitScheme::kGlorot, 3);
  const Batch b = gaussian_batch(16, 2, 2, 8);
  const MlpObjective obj(m, b);
  const ParamVector theta = init_params(m);

  const GradientReport rep = gnp_gradient(obj, theta, GnpConfig::with_alpha(0.5));
  const ParamVector standard = obj.gradient(theta);
  ParamVector ascent = theta;
  ascent.axpy(0.05 / l2_norm(standard), standard);
  const ParamVector sam = obj.gradient(ascent);

  std::vector<CheckResult> out;
  const ParamVector g0 = combine(rep.g1, rep.g2, 0.0);
  out.push_back(at_most("reduction_alpha0_gradient",
                        "alpha = 0 combination vs the plain gradient; measured is the number of "
                        "coordinates that differ bitwise",
                        g0.identical(standard) ? 0.0 : 1.0, 0.0));
  const ParamVector g1 = combine(rep.g1, rep.g2, 1.0);
  out.push_back(at_most("reduction_alpha1_gradient",
                        "alpha = 1 combination vs the gradient at the SAM ascent point; measured "
                        "is 1 when they differ bitwise",
                        g1.identical(sam) ? 0.0 : 1.0, 0.0));
  return out;
}

std::vector<CheckResult> check_runs() {
  std::vector<CheckResult> out;
  RunConfig cfg = tiny_run_config();
  cfg.scheme = Scheme::kStandard;
  cfg.optim = GnpConfig::with_alpha(0.0);
  cfg.optim.lr = 0.1;
  cfg.optim.momentum = 0.9;
  cfg.optim.weight_decay = 1e-4;
  const TrainResult standard = train_run(cfg);
  out.push_back(at_most("reduction_alpha0_run",
                        "alpha = 0 run vs an independent SGD loop; 1 when final parameters "
                        "differ bitwise",
                        standard.params.identical(reference_run(cfg, false)) ? 0.0 : 1.0, 0.0));

  RunConfig sam_cfg = cfg;
  sam_cfg.scheme = Scheme::kSam;
  sam_cfg.optim.alpha = 1.0;
  const TrainResult sam = train_run(sam_cfg);
  out.push_back(at_most("reduction_alpha1_run",
                        "alpha = 1 run vs an independent SAM loop; 1 when final parameters "
                        "differ bitwise",
                        sam.params.identical(reference_run(sam_cfg, true)) ? 0.0 : 1.0, 0.0));

  RunConfig gnp_cfg = cfg;
  gnp_cfg.scheme = Scheme::kGnp;
  gnp_cfg.optim.alpha = 0.8;
  gnp_cfg.deterministic = true;
  const TrainResult a = train_run(gnp_cfg);
  const TrainResult b = train_run(gnp_cfg);
  const bool same = same_trajectory(a.record, b.record) &&
                    to_json(a.record).dump() == to_json(b.record).dump();
  out.push_back(at_most("run_determinism",
                        "two runs of one config; 1 when the serialized records differ",
                        same ? 0.0 : 1.0, 0.0));
  return out;
}

}  // namespace

RunConfig tiny_run_config() {
  RunConfig cfg;
  cfg.name = "verify";
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.dataset.size = 128;
  cfg.model.layer_sizes = {2, 8, 2};
  cfg.probe = false;
  return cfg;
}

ParamVector reference_run(const RunConfig& cfg, bool sam) {
  cfg.validate();
  const Dataset data = generate_dataset(cfg.resolved_dataset());
  const ModelSpec model = cfg.resolved_model();
  const std::size_t n = data.train.size();
  GnpConfig sched = cfg.optim;
  sched.total_steps =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(steps_per_epoch(cfg, n)) * cfg.epochs);

  ParamVector theta = init_params(model);
  std::vector<double> velocity(theta.size(), 0.0);
  std::int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (const auto& idx : batch_indices(n, cfg.batch_size, epoch_shuffle_seed(cfg.seed, epoch))) {
      const Batch batch = data.train.select(idx);
      const MlpObjective obj(model, batch);
      ParamVector g = obj.gradient(theta);
      if (sam) {
        const double norm = l2_norm(g);
        ParamVector ascent = theta;
        if (norm >= cfg.optim.grad_floor) {
          const double s = cfg.optim.r / norm;
          for (std::size_t i = 0; i < ascent.size(); ++i) ascent[i] += s * g[i];
        }
        g = obj.gradient(ascent);
      }
      const double lr = scheduled_lr(step, sched);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        double total = g[i];
        if (cfg.optim.weight_decay != 0.0) total += cfg.optim.weight_decay * theta[i];
        velocity[i] = velocity[i] * cfg.optim.momentum + total;
        theta[i] -= lr * velocity[i];
      }
      if (!theta.all_finite()) throw DivergenceError("reference", step);
      ++step;
    }
  }
  return theta;
}

bool VerifyReport::passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return !checks.empty();
}

const CheckResult& VerifyReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw Error("no check named " + name);
}

VerifyReport run_verify(const VerifyOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  VerifyReport report;
  const auto add = [&](CheckResult c) {
    if (opts.on_check) opts.on_check(c);
    report.checks.push_back(std::move(c));
  };
  add(check_gradients());
  add(check_hvp_order());
  add(check_quadratic_exactness(opts.combine));
  add(check_order_r(opts.combine));
  add(check_identity());
  for (auto& c : check_reductions(opts.combine)) add(std::move(c));
  for (auto& c : check_runs()) add(std::move(c));
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::json to_json(const VerifyReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"description", c.description},
                      {"measured", c.measured},
                      {"tolerance", c.tolerance},
                      {"comparison", c.comparison},
                      {"passed", c.passed},
                      {"detail", c.detail}});
  }
  return {{"passed", report.passed()}, {"seconds", report.seconds}, {"checks", checks}};
}

}  // namespace gnp::harness
