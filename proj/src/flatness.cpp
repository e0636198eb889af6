#include "gnp/flatness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gnp/error.hpp"
#include "gnp/oracle.hpp"
#include "gnp/rng.hpp"

namespace gnp {

namespace {

ParamVector random_unit(const ParamVector& like, Rng& rng) {
  std::normal_distribution<double> gauss;
  ParamVector v = ParamVector::zeros_like(like);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = gauss(rng);
  const double norm = l2_norm(v);
  v *= 1.0 / norm;
  return v;
}

void check_probe_args(double rho, std::size_t n_samples) {
  if (!(rho > 0.0)) throw ConfigError("probe radius must be positive");
  if (n_samples < 1) throw ConfigError("need at least one probe sample");
}

}  // namespace

BallSamples sample_ball(const Objective& objective, const ParamVector& params, double rho,
                        std::size_t n_samples, std::uint64_t seed, int ascent_steps) {
  check_probe_args(rho, n_samples);
  BallSamples out;
  const LossGrad at = objective.loss_and_gradient(params);
  out.base_loss = at.loss;

  auto record = [&](const ParamVector& delta) {
    const double radius = l2_norm(delta);
    if (!(radius > 0.0)) return;
    ParamVector moved = params;
    moved += delta;
    out.radius.push_back(radius);
    out.loss_delta.push_back(objective.loss(moved) - out.base_loss);
  };

  Rng rng(seed);
  ParamVector best_random;
  double best_rise = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_samples; ++i) {
    ParamVector delta = random_unit(params, rng);
    double radius = rho;
    if (i % 4 == 3) radius = (i % 8 == 3) ? 0.5 * rho : 0.25 * rho;
    delta *= radius;
    record(delta);
    if (out.loss_delta.back() > best_rise) {
      best_rise = out.loss_delta.back();
      best_random = delta;
    }
  }

  ParamVector delta;
  const double gnorm = l2_norm(at.grad);
  if (gnorm > 0.0) {
    delta = scale(at.grad, rho / gnorm);
    record(delta);
    record(scale(delta, -1.0));
  } else {
    delta = scale(best_random, rho / l2_norm(best_random));
  }

  // Projected ascent with steps of length rho; iterates stay on the sphere.
  for (int k = 0; k < ascent_steps; ++k) {
    ParamVector moved = params;
    moved += delta;
    const ParamVector g = objective.gradient(moved);
    const double norm = l2_norm(g);
    if (!(norm > 0.0) || !std::isfinite(norm)) break;
    delta.axpy(rho / norm, g);
    const double len = l2_norm(delta);
    if (!(len > 0.0)) break;
    delta *= rho / len;
    record(delta);
  }
  return out;
}

double local_lipschitz(const Objective& objective, const ParamVector& params, double rho,
                       std::size_t n_samples, std::uint64_t seed, int ascent_steps) {
  const BallSamples s = sample_ball(objective, params, rho, n_samples, seed, ascent_steps);
  double best = 0.0;
  for (std::size_t i = 0; i < s.radius.size(); ++i) {
    best = std::max(best, std::abs(s.loss_delta[i]) / s.radius[i]);
  }
  return best;
}

double sharpness_ball(const Objective& objective, const ParamVector& params, double rho,
                      std::size_t n_samples, std::uint64_t seed, int ascent_steps) {
  const BallSamples s = sample_ball(objective, params, rho, n_samples, seed, ascent_steps);
  double best = 0.0;
  for (double d : s.loss_delta) best = std::max(best, d);
  return best;
}

double top_eig_power(const Objective& objective, const ParamVector& params, int iters,
                     std::uint64_t seed) {
  if (iters < 1) throw ConfigError("power iteration needs at least one step");
  Rng rng(seed);
  ParamVector v = random_unit(params, rng);
  double eig = 0.0;
  for (int k = 0; k < iters; ++k) {
    ParamVector w = oracle::fd_hvp(objective, params, v);
    eig = dot(v, w);
    const double norm = l2_norm(w);
    if (!(norm > std::numeric_limits<double>::min()) || !std::isfinite(norm)) {
      throw Error("power iteration breakdown at step " + std::to_string(k));
    }
    w *= 1.0 / norm;
    v = std::move(w);
  }
  return std::abs(eig);
}

FlatnessReport probe_flatness(const Objective& objective, const ParamVector& params,
                              const ProbeConfig& cfg) {
  FlatnessReport rep;
  rep.rho = cfg.rho;
  rep.n_samples = cfg.n_samples;
  rep.grad_norm_at_theta = l2_norm(objective.gradient(params));
  const BallSamples s =
      sample_ball(objective, params, cfg.rho, cfg.n_samples, cfg.seed, cfg.ascent_steps);
  for (std::size_t i = 0; i < s.radius.size(); ++i) {
    rep.local_lipschitz_est = std::max(rep.local_lipschitz_est, std::abs(s.loss_delta[i]) / s.radius[i]);
    rep.sharpness_est = std::max(rep.sharpness_est, s.loss_delta[i]);
  }
  try {
    rep.top_eig_est = top_eig_power(objective, params, cfg.power_iters, cfg.seed);
  } catch (const Error&) {
    rep.top_eig_est = 0.0;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Double well

namespace {

// Root of f on [lo, hi] given a sign change.
template <class F>
double bisect(F f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

DoubleWell::DoubleWell(Shape shape) : shape_(shape) {
  if (!(shape_.flat_curvature > 0.0 && shape_.dip_depth > 0.0 && shape_.dip_width > 0.0)) {
    throw ConfigError("double-well curvature, dip depth and dip width must be positive");
  }
  if (!(shape_.dip_center < shape_.flat_center)) {
    throw ConfigError("double-well dip must lie left of the flat centre");
  }
  // Critical points lie between the dip's left tail and just past the flat centre.
  const double lo = shape_.dip_center - 8.0 * shape_.dip_width;
  const double hi = shape_.flat_center + 1.0;
  const int n = 20000;
  std::vector<double> roots;
  double prev_x = lo, prev_d = derivative(lo);
  for (int i = 1; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    const double d = derivative(x);
    if ((d < 0.0) != (prev_d < 0.0)) {
      roots.push_back(bisect([this](double t) { return derivative(t); }, prev_x, x));
    }
    prev_x = x;
    prev_d = d;
  }
  if (roots.size() != 3) throw ConfigError("double-well shape must have exactly two minima");
  sharp_min_ = roots[0];
  barrier_ = roots[1];
  flat_min_ = roots[2];
}

double DoubleWell::value(double x) const {
  const double u = (x - shape_.dip_center) / shape_.dip_width;
  const double v = x - shape_.flat_center;
  return 0.5 * shape_.flat_curvature * v * v - shape_.dip_depth * std::exp(-0.5 * u * u);
}

double DoubleWell::derivative(double x) const {
  const double u = (x - shape_.dip_center) / shape_.dip_width;
  return shape_.flat_curvature * (x - shape_.flat_center) +
         shape_.dip_depth / shape_.dip_width * u * std::exp(-0.5 * u * u);
}

double DoubleWell::second_derivative(double x) const {
  const double u = (x - shape_.dip_center) / shape_.dip_width;
  return shape_.flat_curvature + shape_.dip_depth / (shape_.dip_width * shape_.dip_width) *
                                     (1.0 - u * u) * std::exp(-0.5 * u * u);
}

std::pair<double, double> DoubleWell::sharp_basin() const {
  return {-std::numeric_limits<double>::infinity(), barrier_};
}

double DoubleWell::loss(const ParamVector& params) const {
  if (params.size() != 1) throw ShapeError("double well is one-dimensional");
  return value(params[0]);
}

LossGrad DoubleWell::loss_and_gradient(const ParamVector& params) const {
  if (params.size() != 1) throw ShapeError("double well is one-dimensional");
  ParamVector g = ParamVector::zeros_like(params);
  g[0] = derivative(params[0]);
  return LossGrad{value(params[0]), std::move(g)};
}

std::string to_string(Basin b) {
  switch (b) {
    case Basin::kFlat:
      return "flat";
    case Basin::kSharp:
      return "sharp";
    case Basin::kDiverged:
      return "diverged";
  }
  return "unknown";
}

double run_double_well(const DoubleWell& landscape, const GnpConfig& cfg, double init,
                       const DoubleWellRun& run) {
  OptimState state = OptimState::start(ParamVector::flat({init}, "x"));
  GnpConfig step_cfg = cfg;
  step_cfg.lr = run.lr;
  step_cfg.total_steps = std::max<std::int64_t>(1, run.steps);
  for (int t = 0; t < run.steps; ++t) {
    state = train_step(state, landscape, step_cfg).state;
  }
  return state.params[0];
}

DoubleWellResult double_well_experiment(const DoubleWell& landscape, const GnpConfig& gnp_cfg,
                                        const std::vector<double>& grid,
                                        const DoubleWellRun& run) {
  DoubleWellResult result;
  GnpConfig standard = gnp_cfg;
  standard.lambda.reset();
  standard.alpha = 0.0;
  const double limit = 1e6;
  for (double init : grid) {
    for (int which = 0; which < 2; ++which) {
      const GnpConfig& cfg = which == 0 ? standard : gnp_cfg;
      BasinTally& tally = which == 0 ? result.standard : result.gnp;
      DoubleWellRow row{init, which == 0 ? "standard" : "gnp", 0.0, Basin::kDiverged};
      try {
        row.final_x = run_double_well(landscape, cfg, init, run);
        if (std::abs(row.final_x) < limit) {
          row.basin = landscape.in_sharp_basin(row.final_x) ? Basin::kSharp : Basin::kFlat;
        }
      } catch (const DivergenceError&) {
        row.final_x = std::numeric_limits<double>::quiet_NaN();
      }
      switch (row.basin) {
        case Basin::kFlat:
          ++tally.flat_count;
          break;
        case Basin::kSharp:
          ++tally.sharp_count;
          break;
        case Basin::kDiverged:
          ++tally.diverged_count;
          break;
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

DoubleWellResult double_well_experiment(const GnpConfig& gnp_cfg, const std::vector<double>& grid) {
  return double_well_experiment(DoubleWell{}, gnp_cfg, grid, DoubleWellRun{});
}

std::string double_well_csv(const DoubleWellResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "init,scheme,final_x,basin\n";
  for (const auto& row : result.rows) {
    out << row.init << ',' << row.scheme << ',' << row.final_x << ',' << to_string(row.basin) << '\n';
  }
  return out.str();
}

}  // namespace gnp
