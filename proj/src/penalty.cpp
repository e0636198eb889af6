#include "gnp/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gnp/error.hpp"

namespace gnp {

Schedule parse_schedule(const std::string& name) {
  if (name == "constant") return Schedule::kConstant;
  if (name == "cosine") return Schedule::kCosine;
  throw ConfigError("unknown schedule '" + name + "'");
}

std::string to_string(Schedule s) { return s == Schedule::kCosine ? "cosine" : "constant"; }

GnpConfig GnpConfig::with_alpha(double alpha, double r) {
  GnpConfig cfg;
  cfg.alpha = alpha;
  cfg.r = r;
  return cfg;
}

GnpConfig GnpConfig::with_lambda(double lambda, double r) {
  GnpConfig cfg;
  cfg.lambda = lambda;
  cfg.r = r;
  return cfg;
}

void GnpConfig::validate() const {
  if (lambda && alpha) throw ConfigError("give either lambda or alpha, not both");
  if (!lambda && !alpha) throw ConfigError("one of lambda or alpha is required");
  if (!(r > 0.0)) throw ConfigError("r must be positive");
  if (!(p >= 1.0)) throw ConfigError("p must be at least 1");
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (total_steps < 1) throw ConfigError("total_steps must be positive");
  if (!(grad_floor > 0.0)) throw ConfigError("grad_floor must be positive");
}

double GnpConfig::balance() const {
  if (alpha) return *alpha;
  if (lambda) return *lambda / r;
  throw ConfigError("one of lambda or alpha is required");
}

double GnpConfig::penalty() const {
  if (lambda) return *lambda;
  if (alpha) return *alpha * r;
  throw ConfigError("one of lambda or alpha is required");
}

double grad_norm_lp(const ParamVector& g, double p) {
  if (p == 2.0) return l2_norm(g);
  double acc = 0.0;
  for (double v : g.values()) acc += std::pow(std::abs(v), p);
  return std::pow(acc, 1.0 / p);
}

double penalized_loss(const Objective& objective, const ParamVector& params,
                      const GnpConfig& cfg) {
  const LossGrad lg = objective.loss_and_gradient(params);
  return lg.loss + cfg.penalty() * grad_norm_lp(lg.grad, cfg.p);
}

double penalized_loss(const ModelSpec& model, const ParamVector& params, const Batch& batch,
                      const GnpConfig& cfg) {
  return penalized_loss(MlpObjective(model, batch), params, cfg);
}

ParamVector perturb_point(const ParamVector& params, const ParamVector& g1, double r,
                          double grad_floor) {
  if (!(r > 0.0)) throw ConfigError("perturbation radius must be positive");
  const double norm = l2_norm(g1);
  ParamVector out = params;
  if (!(norm >= grad_floor)) return out;
  out.axpy(r / norm, g1);
  return out;
}

ParamVector hvp_taylor(const Objective& objective, const ParamVector& params,
                       const ParamVector& v, double r) {
  if (!(r > 0.0)) throw ConfigError("r must be positive");
  if (!v.all_finite()) throw ConfigError("direction must be finite");
  ParamVector shifted = params;
  shifted.axpy(r, v);
  ParamVector out = objective.gradient(shifted);
  out -= objective.gradient(params);
  out *= 1.0 / r;
  return out;
}

ParamVector hvp_taylor(const ModelSpec& model, const ParamVector& params, const Batch& batch,
                       const ParamVector& v, double r) {
  return hvp_taylor(MlpObjective(model, batch), params, v, r);
}

ParamVector combine_gradients(const ParamVector& g1, const ParamVector& g2, double alpha) {
  if (!g1.compatible(g2)) throw ShapeError("combine: incompatible gradients");
  if (alpha == 0.0) return g1;
  if (alpha == 1.0) return g2;
  ParamVector g = ParamVector::zeros_like(g1);
  const double keep = 1.0 - alpha;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = keep * g1[i] + alpha * g2[i];
  return g;
}

GradientReport gnp_gradient(const Objective& objective, const ParamVector& params,
                            const GnpConfig& cfg) {
  cfg.validate();
  GradientReport rep;
  LossGrad first = objective.loss_and_gradient(params);
  if (!std::isfinite(first.loss) || !first.grad.all_finite()) throw DivergenceError("g1");
  rep.loss_at_theta = first.loss;
  rep.g1 = std::move(first.grad);
  rep.grad_norm = l2_norm(rep.g1);

  const ParamVector perturbed = perturb_point(params, rep.g1, cfg.r, cfg.grad_floor);
  rep.g2 = objective.gradient(perturbed);
  if (!rep.g2.all_finite()) throw DivergenceError("g2");
  rep.perturbed_grad_norm = l2_norm(rep.g2);

  rep.g = combine_gradients(rep.g1, rep.g2, cfg.balance());
  rep.penalized_loss = rep.loss_at_theta + cfg.penalty() * grad_norm_lp(rep.g1, cfg.p);
  return rep;
}

GradientReport gnp_gradient(const ModelSpec& model, const ParamVector& params,
                            const Batch& batch, const GnpConfig& cfg) {
  return gnp_gradient(MlpObjective(model, batch), params, cfg);
}

OptimState OptimState::start(ParamVector params) {
  OptimState s;
  s.velocity = ParamVector::zeros_like(params);
  s.params = std::move(params);
  return s;
}

StepResult train_step(const OptimState& state, const Objective& objective, const GnpConfig& cfg) {
  if (!state.params.compatible(state.velocity)) {
    throw ShapeError("optimizer velocity does not match parameters");
  }
  StepResult out;
  try {
    out.report = gnp_gradient(objective, state.params, cfg);
  } catch (const DivergenceError& e) {
    throw DivergenceError(e.where(), state.step);
  }
  out.lr = scheduled_lr(state.step, cfg);

  ParamVector total = out.report.g;
  if (cfg.weight_decay != 0.0) total.axpy(cfg.weight_decay, state.params);
  out.state.velocity = state.velocity;
  out.state.velocity *= cfg.momentum;
  out.state.velocity += total;

  out.state.params = state.params;
  out.state.params.axpy(-out.lr, out.state.velocity);
  out.state.step = state.step + 1;
  if (!out.state.params.all_finite()) throw DivergenceError("parameters", state.step);
  return out;
}

StepResult train_step(const OptimState& state, const ModelSpec& model, const Batch& batch,
                      const GnpConfig& cfg) {
  return train_step(state, MlpObjective(model, batch), cfg);
}

double cosine_lr(std::int64_t step, const GnpConfig& cfg) {
  if (step < 0 || step > cfg.total_steps) {
    throw ConfigError("step " + std::to_string(step) + " outside [0, " +
                      std::to_string(cfg.total_steps) + "]");
  }
  const double t = static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  return 0.5 * cfg.lr * (1.0 + std::cos(std::numbers::pi * t));
}

double scheduled_lr(std::int64_t step, const GnpConfig& cfg) {
  if (cfg.schedule == Schedule::kConstant) return cfg.lr;
  return cosine_lr(std::clamp<std::int64_t>(step, 0, cfg.total_steps), cfg);
}

}  // namespace gnp
