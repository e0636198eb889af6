#include "gnp/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "gnp/error.hpp"
#include "gnp/rng.hpp"

namespace gnp::oracle {

namespace {

void require_small(std::size_t n, const char* what) {
  if (n > kMaxParams) {
    throw Error(std::string(what) + " is limited to " + std::to_string(kMaxParams) +
                " parameters, got " + std::to_string(n));
  }
}

void require_nonzero(double norm, const char* what) {
  if (!(norm > 0.0)) throw Error(std::string(what) + " is undefined at a zero-gradient point");
}

}  // namespace

QuadraticProblem::QuadraticProblem(std::vector<double> matrix, std::vector<double> center)
    : a_(std::move(matrix)), center_(std::move(center)) {
  n_ = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(a_.size()))));
  if (n_ == 0 || n_ * n_ != a_.size()) throw ShapeError("quadratic matrix must be square");
  if (n_ > kMaxQuadraticDim) throw ShapeError("quadratic problems are limited to n <= 64");
  if (center_.empty()) center_.assign(n_, 0.0);
  if (center_.size() != n_) throw ShapeError("quadratic center has the wrong dimension");
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      const double x = entry(i, j), y = entry(j, i);
      if (std::abs(x - y) > 1e-12 * std::max({1.0, std::abs(x), std::abs(y)})) {
        throw ShapeError("quadratic matrix is not symmetric");
      }
    }
  }
}

QuadraticProblem QuadraticProblem::diagonal(const std::vector<double>& diag,
                                            std::vector<double> center) {
  const std::size_t n = diag.size();
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] = diag[i];
  QuadraticProblem q(std::move(a), std::move(center));
  q.spectrum_ = diag;
  return q;
}

QuadraticProblem QuadraticProblem::with_spectrum(const std::vector<double>& eigenvalues,
                                                 std::uint64_t seed) {
  const std::size_t n = eigenvalues.size();
  // Q starts as identity; apply a few reflections I - 2 u u^T.
  std::vector<double> q(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) q[i * n + i] = 1.0;
  Rng rng(seed);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> u(n);
    double norm = 0.0;
    for (double& x : u) {
      x = gauss(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : u) x /= norm;
    for (std::size_t i = 0; i < n; ++i) {
      double proj = 0.0;
      for (std::size_t j = 0; j < n; ++j) proj += q[i * n + j] * u[j];
      for (std::size_t j = 0; j < n; ++j) q[i * n + j] -= 2.0 * proj * u[j];
    }
  }
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += q[i * n + k] * eigenvalues[k] * q[j * n + k];
      a[i * n + j] = acc;
      a[j * n + i] = acc;
    }
  }
  QuadraticProblem out(std::move(a));
  out.spectrum_ = eigenvalues;
  return out;
}

ParamVector QuadraticProblem::apply(const ParamVector& v) const {
  if (v.size() != n_) throw ShapeError("quadratic problem dimension mismatch");
  ParamVector out = ParamVector::zeros_like(v);
  for (std::size_t i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n_; ++j) acc += entry(i, j) * v[j];
    out[i] = acc;
  }
  return out;
}

double QuadraticProblem::loss(const ParamVector& params) const {
  return loss_and_gradient(params).loss;
}

LossGrad QuadraticProblem::loss_and_gradient(const ParamVector& params) const {
  if (params.size() != n_) throw ShapeError("quadratic problem dimension mismatch");
  ParamVector offset = params;
  for (std::size_t i = 0; i < n_; ++i) offset[i] -= center_[i];
  ParamVector grad = apply(offset);
  double loss = 0.0;
  for (std::size_t i = 0; i < n_; ++i) loss += offset[i] * grad[i];
  return LossGrad{0.5 * loss, std::move(grad)};
}

ParamVector QuadraticProblem::exact_penalized_gradient(const ParamVector& params,
                                                       double lambda) const {
  ParamVector g = gradient(params);
  const double norm = l2_norm(g);
  require_nonzero(norm, "the penalized gradient");
  ParamVector out = apply(g);
  out *= lambda / norm;
  out += g;
  return out;
}

ParamVector fd_gradient(const LossFn& loss, const ParamVector& params, double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  require_small(params.size(), "fd_gradient");
  ParamVector grad = ParamVector::zeros_like(params);
  ParamVector probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double base = params[i];
    const double step = h * std::max(1.0, std::abs(base));
    probe[i] = base + step;
    const double up = loss(probe);
    probe[i] = base - step;
    const double down = loss(probe);
    probe[i] = base;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

ParamVector fd_gradient(const Objective& objective, const ParamVector& params, double h) {
  return fd_gradient([&](const ParamVector& p) { return objective.loss(p); }, params, h);
}

ParamVector fd_hvp(const Objective& objective, const ParamVector& params, const ParamVector& v,
                   double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  ParamVector up = params;
  up.axpy(h, v);
  ParamVector down = params;
  down.axpy(-h, v);
  ParamVector out = objective.gradient(up);
  out -= objective.gradient(down);
  out *= 1.0 / (2.0 * h);
  return out;
}

ParamVector exact_penalized_gradient(const Objective& objective, const ParamVector& params,
                                     double lambda, double h, double hvp_h) {
  ParamVector g = fd_gradient(objective, params, h);
  const double norm = l2_norm(g);
  require_nonzero(norm, "the penalized gradient");
  if (lambda == 0.0) return g;
  const ParamVector v = scale(g, 1.0 / norm);
  g.axpy(lambda, fd_hvp(objective, params, v, hvp_h));
  return g;
}

ParamVector exact_penalized_gradient(const QuadraticProblem& problem, const ParamVector& params,
                                     double lambda) {
  return problem.exact_penalized_gradient(params, lambda);
}

IdentitySides appendix_identity_sides(const Objective& objective, const ParamVector& params,
                                      double h, double hvp_h) {
  require_small(params.size(), "appendix_identity_check");
  const ParamVector g = objective.gradient(params);
  const double norm = l2_norm(g);
  require_nonzero(norm, "the gradient-norm identity");
  IdentitySides sides;
  sides.norm_gradient = fd_gradient(
      [&](const ParamVector& p) { return l2_norm(objective.gradient(p)); }, params, h);
  sides.hessian_term = fd_hvp(objective, params, scale(g, 1.0 / norm), hvp_h);
  sides.relative_error = relative_error(sides.norm_gradient, sides.hessian_term);
  return sides;
}

double appendix_identity_check(const Objective& objective, const ParamVector& params, double h) {
  return appendix_identity_sides(objective, params, h).relative_error;
}

double relative_error(const ParamVector& a, const ParamVector& b) {
  const double diff = l2_norm(sub(a, b));
  const double ref = l2_norm(b);
  return ref > 0.0 ? diff / ref : diff;
}

double max_coordinate_relative_error(const ParamVector& a, const ParamVector& b, double floor) {
  if (!a.compatible(b)) throw ShapeError("relative error: incompatible vectors");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace gnp::oracle
