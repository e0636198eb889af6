#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnp/objective.hpp"
#include "gnp/param_vector.hpp"
#include "gnp/penalty.hpp"

namespace gnp {

struct ProbeConfig {
  double rho = 0.05;
  std::size_t n_samples = 64;
  std::uint64_t seed = 0;
  int ascent_steps = 10;
  int power_iters = 50;
};

struct FlatnessReport {
  double grad_norm_at_theta = 0.0;
  double local_lipschitz_est = 0.0;
  double sharpness_est = 0.0;
  double top_eig_est = 0.0;
  std::size_t n_samples = 0;
  double rho = 0.0;
};

/// Points probed inside the rho-ball around theta: n seeded random points
/// (mostly on the sphere, every fourth one inside), the two points +-rho along
/// the gradient, and the iterates of a projected normalized-gradient ascent.
/// Both ball estimators read the same set, so for equal (seed, n) the
/// sharpness estimate never exceeds rho times the Lipschitz estimate.
struct BallSamples {
  double base_loss = 0.0;
  std::vector<double> radius;      // ||delta||
  std::vector<double> loss_delta;  // L(theta + delta) - L(theta)
};

BallSamples sample_ball(const Objective& objective, const ParamVector& params, double rho,
                        std::size_t n_samples, std::uint64_t seed, int ascent_steps = 10);

/// max |L(theta') - L(theta)| / ||theta' - theta|| over the probed points.
double local_lipschitz(const Objective& objective, const ParamVector& params, double rho,
                       std::size_t n_samples, std::uint64_t seed, int ascent_steps = 10);
/// max(0, max L(theta') - L(theta)) over the probed points.
double sharpness_ball(const Objective& objective, const ParamVector& params, double rho,
                      std::size_t n_samples, std::uint64_t seed, int ascent_steps = 10);
/// |Rayleigh quotient| after `iters` power steps with finite-difference
/// Hessian products. Throws Error if an iterate collapses to zero.
double top_eig_power(const Objective& objective, const ParamVector& params, int iters,
                     std::uint64_t seed);

/// All three estimators plus the gradient norm. A power-iteration breakdown
/// (identically zero Hessian product) is reported as top_eig_est = 0.
FlatnessReport probe_flatness(const Objective& objective, const ParamVector& params,
                              const ProbeConfig& cfg);

/// 1-D landscape: a wide quadratic bowl with a narrow Gaussian dip carved
/// into its wall.
///   L(x) = k_f/2 (x - x_f)^2 - D exp(-(x - x_d)^2 / (2 w^2))
/// Defaults (x_f = 4, k_f = 1, x_d = 0, D = 0.75, w = 0.1) give exactly two
/// minima: a sharp one near 0.065 with curvature about 36 and the flat one at
/// 4 with curvature 1, separated by a barrier near 0.143. The dip bounds the
/// slope of the sharp wall, so a perturbed gradient taken across the barrier
/// outweighs it.
class DoubleWell final : public Objective {
 public:
  struct Shape {
    double flat_center = 4.0;
    double flat_curvature = 1.0;
    double dip_center = 0.0;
    double dip_depth = 0.75;
    double dip_width = 0.1;
  };

  DoubleWell() : DoubleWell(Shape{}) {}
  /// Throws ConfigError unless the shape has exactly two minima with the dip
  /// to the left of the flat centre.
  explicit DoubleWell(Shape shape);

  const Shape& shape() const noexcept { return shape_; }
  double value(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;

  double sharp_minimum() const noexcept { return sharp_min_; }
  double barrier() const noexcept { return barrier_; }
  double flat_minimum() const noexcept { return flat_min_; }
  /// Everything left of the barrier drains into the sharp minimum.
  bool in_sharp_basin(double x) const { return x < barrier_; }
  /// (-inf, barrier)
  std::pair<double, double> sharp_basin() const;

  double loss(const ParamVector& params) const override;
  LossGrad loss_and_gradient(const ParamVector& params) const override;

 private:
  Shape shape_;
  double sharp_min_ = 0.0;
  double barrier_ = 0.0;
  double flat_min_ = 0.0;
};

enum class Basin { kFlat, kSharp, kDiverged };
std::string to_string(Basin b);

struct BasinTally {
  int flat_count = 0;
  int sharp_count = 0;
  int diverged_count = 0;
};

struct DoubleWellRow {
  double init = 0.0;
  std::string scheme;  // "standard" or "gnp"
  double final_x = 0.0;
  Basin basin = Basin::kFlat;
};

struct DoubleWellResult {
  BasinTally standard;
  BasinTally gnp;
  std::vector<DoubleWellRow> rows;
};

struct DoubleWellRun {
  double lr = 0.01;
  int steps = 2000;
};

/// Runs plain gradient descent and the penalized step from every grid point
/// and tallies which basin each ends in. The standard scheme is the same step
/// with alpha = 0 and otherwise identical settings.
DoubleWellResult double_well_experiment(const DoubleWell& landscape, const GnpConfig& gnp_cfg,
                                        const std::vector<double>& grid,
                                        const DoubleWellRun& run = {});
/// Default-shaped landscape with the default run settings.
DoubleWellResult double_well_experiment(const GnpConfig& gnp_cfg, const std::vector<double>& grid);

/// Final iterate of `steps` updates from `init`; throws DivergenceError.
double run_double_well(const DoubleWell& landscape, const GnpConfig& cfg, double init,
                       const DoubleWellRun& run);

std::string double_well_csv(const DoubleWellResult& result);

}  // namespace gnp
