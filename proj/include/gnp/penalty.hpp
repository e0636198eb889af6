#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gnp/data.hpp"
#include "gnp/mlp.hpp"
#include "gnp/objective.hpp"
#include "gnp/param_vector.hpp"

namespace gnp {

enum class Schedule { kConstant, kCosine };

Schedule parse_schedule(const std::string& name);
std::string to_string(Schedule s);

/// Hyperparameters of the penalized update. Exactly one of `lambda` and
/// `alpha` is set; the other follows from alpha = lambda / r.
struct GnpConfig {
  std::optional<double> lambda;
  std::optional<double> alpha;
  double r = 0.05;
  double p = 2.0;
  double lr = 0.1;
  double momentum = 0.0;
  double weight_decay = 0.0;
  Schedule schedule = Schedule::kConstant;
  std::int64_t total_steps = 1;
  double grad_floor = 1e-12;

  static GnpConfig with_alpha(double alpha, double r = 0.05);
  static GnpConfig with_lambda(double lambda, double r = 0.05);

  /// Throws ConfigError when both or neither of lambda/alpha are given, or a
  /// field is out of range.
  void validate() const;
  double balance() const;  // alpha
  double penalty() const;  // lambda
  /// alpha outside [0,1]: permitted, but such runs are flagged.
  bool experimental() const { return balance() < 0.0 || balance() > 1.0; }
};

/// (sum |g_i|^p)^(1/p); p = 2 takes the sqrt(dot) path.
double grad_norm_lp(const ParamVector& g, double p = 2.0);

/// L_S(theta) + lambda * ||grad L_S(theta)||_p. For reporting only.
double penalized_loss(const Objective& objective, const ParamVector& params,
                      const GnpConfig& cfg);
double penalized_loss(const ModelSpec& model, const ParamVector& params, const Batch& batch,
                      const GnpConfig& cfg);

/// theta + r * g1 / ||g1||_2, or theta unchanged when ||g1||_2 < grad_floor.
ParamVector perturb_point(const ParamVector& params, const ParamVector& g1, double r,
                          double grad_floor = 1e-12);

/// One-sided Taylor estimate of H v: (grad L(theta + r v) - grad L(theta)) / r.
ParamVector hvp_taylor(const Objective& objective, const ParamVector& params,
                       const ParamVector& v, double r);
ParamVector hvp_taylor(const ModelSpec& model, const ParamVector& params, const Batch& batch,
                       const ParamVector& v, double r);

struct GradientReport {
  ParamVector g1;  // gradient at theta
  ParamVector g2;  // gradient at the perturbed point, same batch
  ParamVector g;   // (1 - alpha) g1 + alpha g2
  double loss_at_theta = 0.0;
  double grad_norm = 0.0;            // ||g1||_2
  double perturbed_grad_norm = 0.0;  // ||g2||_2
  double penalized_loss = 0.0;       // loss_at_theta + lambda ||g1||_p
};

/// (1 - alpha) g1 + alpha g2; alpha = 0 and alpha = 1 return g1 and g2 verbatim.
ParamVector combine_gradients(const ParamVector& g1, const ParamVector& g2, double alpha);

/// Two gradient evaluations on the same objective (same batch). The perturbed
/// point is a constant: nothing is differentiated through it. Throws
/// DivergenceError naming "g1" or "g2" on non-finite values.
GradientReport gnp_gradient(const Objective& objective, const ParamVector& params,
                            const GnpConfig& cfg);
GradientReport gnp_gradient(const ModelSpec& model, const ParamVector& params,
                            const Batch& batch, const GnpConfig& cfg);

struct OptimState {
  ParamVector params;
  ParamVector velocity;
  std::int64_t step = 0;

  static OptimState start(ParamVector params);
};

struct StepResult {
  OptimState state;
  GradientReport report;
  double lr = 0.0;
};

/// One update:
///   g_total  = g + weight_decay * theta
///   velocity = momentum * velocity + g_total
///   theta   -= lr_t * velocity
/// Throws DivergenceError carrying the step index when anything goes
/// non-finite.
StepResult train_step(const OptimState& state, const Objective& objective, const GnpConfig& cfg);
StepResult train_step(const OptimState& state, const ModelSpec& model, const Batch& batch,
                      const GnpConfig& cfg);

/// lr/2 * (1 + cos(pi t / T)); throws ConfigError for t outside [0, T].
double cosine_lr(std::int64_t step, const GnpConfig& cfg);
/// Learning rate at `step` under cfg.schedule. Steps beyond T clamp to T.
double scheduled_lr(std::int64_t step, const GnpConfig& cfg);

}  // namespace gnp
