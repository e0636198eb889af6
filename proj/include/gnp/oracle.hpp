#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gnp/objective.hpp"
#include "gnp/param_vector.hpp"

namespace gnp {

/// Ground truth for everything the penalized step approximates. All
/// differencing here is central, so each oracle is strictly more accurate than
/// the one-sided scheme it checks.
namespace oracle {

/// Oracles that cost O(n) objective evaluations refuse larger problems.
inline constexpr std::size_t kMaxParams = 2000;
inline constexpr std::size_t kMaxQuadraticDim = 64;
inline constexpr double kGradientStep = 1e-5;
inline constexpr double kHvpStep = 1e-4;

/// L(theta) = 1/2 (theta - c)^T A (theta - c), A symmetric.
class QuadraticProblem final : public Objective {
 public:
  /// `matrix` is row-major n x n; `center` defaults to the origin.
  QuadraticProblem(std::vector<double> matrix, std::vector<double> center = {});

  static QuadraticProblem diagonal(const std::vector<double>& diag,
                                   std::vector<double> center = {});
  /// Q diag(eigenvalues) Q^T with Q a product of seeded Householder
  /// reflections, so the spectrum is known exactly.
  static QuadraticProblem with_spectrum(const std::vector<double>& eigenvalues,
                                        std::uint64_t seed);

  std::size_t dim() const noexcept { return n_; }
  double entry(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  const std::vector<double>& center() const noexcept { return center_; }
  /// Empty unless built through with_spectrum() or diagonal().
  const std::vector<double>& spectrum() const noexcept { return spectrum_; }

  double loss(const ParamVector& params) const override;
  LossGrad loss_and_gradient(const ParamVector& params) const override;

  /// A v
  ParamVector apply(const ParamVector& v) const;
  /// Closed form A g + lambda A^2 g / ||A g|| with g = theta - c.
  ParamVector exact_penalized_gradient(const ParamVector& params, double lambda) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
  std::vector<double> center_;
  std::vector<double> spectrum_;
};

using LossFn = std::function<double(const ParamVector&)>;

/// (L(theta + h_i e_i) - L(theta - h_i e_i)) / (2 h_i), h_i = h max(1, |theta_i|).
ParamVector fd_gradient(const LossFn& loss, const ParamVector& params, double h = kGradientStep);
ParamVector fd_gradient(const Objective& objective, const ParamVector& params,
                        double h = kGradientStep);

/// (grad L(theta + h v) - grad L(theta - h v)) / (2h).
ParamVector fd_hvp(const Objective& objective, const ParamVector& params, const ParamVector& v,
                   double h = kHvpStep);

/// grad L + lambda H grad L / ||grad L|| with the gradient from fd_gradient and
/// the Hessian product from fd_hvp. Throws Error at a zero-gradient point.
ParamVector exact_penalized_gradient(const Objective& objective, const ParamVector& params,
                                     double lambda, double h = kGradientStep,
                                     double hvp_h = kHvpStep);
/// Closed form for quadratics.
ParamVector exact_penalized_gradient(const QuadraticProblem& problem, const ParamVector& params,
                                     double lambda);

struct IdentitySides {
  ParamVector norm_gradient;  // fd of theta -> ||grad L(theta)||_2
  ParamVector hessian_term;   // H g / ||g||, via fd_hvp
  double relative_error = 0.0;
};

/// Both sides of grad ||grad L||_2 = H grad L / ||grad L||_2.
IdentitySides appendix_identity_sides(const Objective& objective, const ParamVector& params,
                                      double h = kGradientStep, double hvp_h = kHvpStep);
double appendix_identity_check(const Objective& objective, const ParamVector& params,
                               double h = kGradientStep);

/// ||a - b|| / ||b||, or ||a - b|| when b is zero.
double relative_error(const ParamVector& a, const ParamVector& b);
/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
double max_coordinate_relative_error(const ParamVector& a, const ParamVector& b,
                                     double floor = 1e-3);

}  // namespace oracle
}  // namespace gnp
