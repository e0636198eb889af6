#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "gnp/error.hpp"
#include "gnp/oracle.hpp"
#include "gnp/penalty.hpp"

using namespace gnp;
using oracle::QuadraticProblem;

namespace {

// L = sum(x^4)/4 + sum(x^2)/2. Gradient x^3 + x, Hessian diag(3x^2 + 1).
class Quartic final : public Objective {
 public:
  double loss(const ParamVector& p) const override {
    double acc = 0.0;
    for (double x : p.values()) acc += 0.25 * x * x * x * x + 0.5 * x * x;
    return acc;
  }
  LossGrad loss_and_gradient(const ParamVector& p) const override {
    ParamVector g = ParamVector::zeros_like(p);
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * p[i] * p[i] + p[i];
    return {loss(p), g};
  }
  ParamVector hvp(const ParamVector& p, const ParamVector& v) const {
    ParamVector out = ParamVector::zeros_like(p);
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = (3.0 * p[i] * p[i] + 1.0) * v[i];
    return out;
  }
  ParamVector exact_penalized(const ParamVector& p, double lambda) const {
    ParamVector g = gradient(p);
    const ParamVector hg = hvp(p, g);
    return add(g, scale(hg, lambda / l2_norm(g)));
  }
};

// Finite at the origin, infinite anywhere else.
class Cliff final : public Objective {
 public:
  double loss(const ParamVector& p) const override { return p[0] == 1.0 ? 0.0 : 1.0; }
  LossGrad loss_and_gradient(const ParamVector& p) const override {
    ParamVector g = ParamVector::zeros_like(p);
    g[0] = p[0] == 1.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return {loss(p), g};
  }
};

bool bitwise_equal(const ParamVector& a, const ParamVector& b) { return a.identical(b); }

double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
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

const QuadraticProblem& diag14() {
  static const QuadraticProblem q = QuadraticProblem::diagonal({1.0, 4.0});
  return q;
}

}  // namespace

TEST_CASE("config resolution") {
  GnpConfig cfg = GnpConfig::with_alpha(0.8, 0.1);
  CHECK(cfg.penalty() == doctest::Approx(0.08));
  cfg = GnpConfig::with_lambda(0.08, 0.1);
  CHECK(cfg.balance() == doctest::Approx(0.8));
  CHECK_FALSE(cfg.experimental());
  cfg.alpha = 0.8;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  GnpConfig none;
  CHECK_THROWS_AS(none.validate(), ConfigError);
  GnpConfig neg = GnpConfig::with_alpha(-0.2);
  CHECK_NOTHROW(neg.validate());
  CHECK(neg.experimental());
  CHECK(GnpConfig::with_alpha(2.0).experimental());
  GnpConfig bad_r = GnpConfig::with_alpha(0.5, 0.0);
  CHECK_THROWS_AS(bad_r.validate(), ConfigError);
  GnpConfig bad_m = GnpConfig::with_alpha(0.5);
  bad_m.momentum = 1.0;
  CHECK_THROWS_AS(bad_m.validate(), ConfigError);
}

TEST_CASE("grad_norm_lp") {
  CHECK(grad_norm_lp(ParamVector::flat({0, 0}), 1.0) == 0.0);
  CHECK(grad_norm_lp(ParamVector::flat({0, 0}), 3.0) == 0.0);
  CHECK(grad_norm_lp(ParamVector::flat({3, 4}), 2.0) == 5.0);
  CHECK(grad_norm_lp(ParamVector::flat({3, -4}), 1.0) == doctest::Approx(7.0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(50);
    for (double& x : v) x = gauss(rng);
    const ParamVector p = ParamVector::flat(v);
    CHECK(std::abs(grad_norm_lp(p, 2.0) - std::sqrt(dot(p, p))) <= 1e-12 * l2_norm(p));
    // General-p path agrees with the p = 2 shortcut.
    CHECK(std::abs(grad_norm_lp(p, 2.0 + 1e-15) - l2_norm(p)) <= 1e-12 * l2_norm(p));
  }
}

TEST_CASE("penalized_loss") {
  const ParamVector theta = ParamVector::flat({1.0, 1.0});
  SUBCASE("lambda = 0 is the plain loss") {
    CHECK(penalized_loss(diag14(), theta, GnpConfig::with_lambda(0.0)) == diag14().loss(theta));
  }
  SUBCASE("arithmetic with gradient (3,4) and loss 0.5") {
    // L = 0.5 (theta - c)^T I (theta - c) at distance (3,4): gradient (3,4), loss 12.5;
    // shift by a constant so the loss is 0.5.
    class Shifted final : public Objective {
     public:
      double loss(const ParamVector&) const override { return 0.5; }
      LossGrad loss_and_gradient(const ParamVector& p) const override {
        ParamVector g = ParamVector::zeros_like(p);
        g[0] = 3.0;
        g[1] = 4.0;
        return {0.5, g};
      }
    } fixed;
    CHECK(penalized_loss(fixed, theta, GnpConfig::with_lambda(1.0)) == 5.5);
  }
  SUBCASE("quadratic closed form") {
    const double expect = 2.5 + 0.08 * std::sqrt(17.0);
    CHECK(std::abs(penalized_loss(diag14(), theta, GnpConfig::with_lambda(0.08)) - expect) < 1e-14);
    CHECK(penalized_loss(diag14(), theta, GnpConfig::with_lambda(0.08)) == doctest::Approx(2.8299).epsilon(1e-4));
  }
}

TEST_CASE("perturb_point") {
  const ParamVector zero = ParamVector::flat({0.0, 0.0});
  CHECK(perturb_point(zero, ParamVector::flat({0.0, 0.0}), 0.1).identical(zero));
  const ParamVector p = perturb_point(zero, ParamVector::flat({3.0, 4.0}), 0.1);
  CHECK(p[0] == doctest::Approx(0.06).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.08).epsilon(1e-15));
  CHECK_THROWS_AS(perturb_point(zero, zero, 0.0), ConfigError);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> t(10), g(10);
    const double mag = std::pow(10.0, trial % 9 - 4);
    for (double& x : t) x = gauss(rng);
    for (double& x : g) x = gauss(rng) * mag;
    const double r = 0.01 + 0.5 * (trial % 7);
    const ParamVector theta = ParamVector::flat(t);
    const ParamVector moved = perturb_point(theta, ParamVector::flat(g), r);
    CHECK(std::abs(l2_norm(sub(moved, theta)) - r) <= 1e-12 * std::max(1.0, r) * 10);
  }
  // Below the floor nothing moves.
  CHECK(perturb_point(zero, ParamVector::flat({1e-13, 0.0}), 0.1, 1e-12).identical(zero));
}

TEST_CASE("hvp_taylor") {
  SUBCASE("exact on quadratics for any r") {
    const QuadraticProblem q = QuadraticProblem::with_spectrum({0.5, 1.0, 3.0, 7.0}, 2);
    const ParamVector theta = ParamVector::flat({0.3, -1.0, 2.0, 0.5});
    const ParamVector v = ParamVector::flat({1.0, 0.5, -0.25, 2.0});
    for (double r : {1.0, 0.1, 0.001}) {
      CHECK(oracle::relative_error(hvp_taylor(q, theta, v, r), q.apply(v)) < 1e-10);
    }
  }
  SUBCASE("zero direction") {
    const ParamVector theta = ParamVector::flat({0.3, -1.0});
    const ParamVector h = hvp_taylor(Quartic{}, theta, ParamVector::flat({0.0, 0.0}), 0.1);
    CHECK(l2_norm(h) == 0.0);
  }
  SUBCASE("first-order accuracy on a quartic") {
    const Quartic f;
    const ParamVector theta = ParamVector::flat({0.8, -0.5, 1.2});
    const ParamVector v = ParamVector::flat({0.6, 0.0, -0.8});
    const ParamVector truth = oracle::fd_hvp(f, theta, v);
    CHECK(oracle::relative_error(truth, f.hvp(theta, v)) < 1e-8);
    std::vector<double> rs{0.1, 0.05, 0.025}, errs;
    for (double r : rs) errs.push_back(l2_norm(sub(hvp_taylor(f, theta, v, r), truth)));
    CHECK(errs[1] / errs[0] == doctest::Approx(0.5).epsilon(0.1));
    CHECK(errs[2] / errs[1] == doctest::Approx(0.5).epsilon(0.1));
    CHECK(slope(rs, errs) == doctest::Approx(1.0).epsilon(0.1));
  }
  CHECK_THROWS_AS(hvp_taylor(Quartic{}, ParamVector::flat({1.0}), ParamVector::flat({1.0}), -1.0),
                  ConfigError);
}

TEST_CASE("gnp_gradient on the diag(1,4) quadratic") {
  const ParamVector theta = ParamVector::flat({1.0, 1.0});
  const GradientReport rep = gnp_gradient(diag14(), theta, GnpConfig::with_alpha(0.8, 0.1));
  CHECK(rep.g1[0] == 1.0);
  CHECK(rep.g1[1] == 4.0);
  CHECK(rep.g2[0] == doctest::Approx(1.024254).epsilon(1e-6));
  CHECK(rep.g2[1] == doctest::Approx(4.388057).epsilon(1e-6));
  CHECK(rep.g[0] == doctest::Approx(1.019403).epsilon(1e-6));
  CHECK(rep.g[1] == doctest::Approx(4.310446).epsilon(1e-6));
  CHECK(rep.grad_norm == doctest::Approx(std::sqrt(17.0)));
  CHECK(rep.loss_at_theta == 2.5);
  const ParamVector exact = ParamVector::flat({1.0 + 0.08 / std::sqrt(17.0), 4.0 + 0.08 * 16.0 / std::sqrt(17.0)});
  CHECK(oracle::relative_error(rep.g, exact) < 1e-12);
}

TEST_CASE("reduction identities") {
  const ModelSpec spec = testing::mlp({2, 12, 2}, Activation::kTanh, 3);
  const ParamVector theta = init_params(spec);
  const Batch batch = testing::random_batch(16, 2, 2, 8);
  const MlpObjective obj(spec, batch);

  const GradientReport standard = gnp_gradient(obj, theta, GnpConfig::with_alpha(0.0));
  CHECK(bitwise_equal(standard.g, obj.gradient(theta)));
  CHECK(bitwise_equal(standard.g, standard.g1));

  const GnpConfig sam_cfg = GnpConfig::with_alpha(1.0);
  const GradientReport sam = gnp_gradient(obj, theta, sam_cfg);
  const ParamVector g = obj.gradient(theta);
  ParamVector ascent = theta;
  ascent.axpy(sam_cfg.r / l2_norm(g), g);
  CHECK(bitwise_equal(sam.g, obj.gradient(ascent)));
  CHECK(bitwise_equal(sam.g, sam.g2));

  for (double alpha : {0.1, 0.25, 0.5, 0.8, 0.9}) {
    const GradientReport rep = gnp_gradient(obj, theta, GnpConfig::with_alpha(alpha));
    for (std::size_t i = 0; i < rep.g.size(); ++i) {
      const double keep = 1.0 - alpha;
      const double expect = keep * rep.g1[i] + alpha * rep.g2[i];
      CHECK(rep.g[i] == expect);
      CHECK(rep.g[i] >= std::min(rep.g1[i], rep.g2[i]) - 1e-15);
      CHECK(rep.g[i] <= std::max(rep.g1[i], rep.g2[i]) + 1e-15);
    }
    CHECK(rep.grad_norm >= 0.0);
  }
}

TEST_CASE("quadratic exactness against the closed-form penalized gradient") {
  std::vector<QuadraticProblem> problems{
      QuadraticProblem::diagonal({1.0, 4.0}),
      QuadraticProblem::with_spectrum({0.2, 1.0, 2.5, 9.0, 15.0}, 7),
      QuadraticProblem::with_spectrum({1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 30.0}, 11),
  };
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss;
  for (const auto& q : problems) {
    std::vector<double> t(q.dim());
    for (double& x : t) x = gauss(rng);
    const ParamVector theta = ParamVector::flat(t);
    for (double r : {0.2, 0.1, 0.05, 0.01, 1e-3}) {
      for (double alpha : {0.3, 0.8, 1.0, 1.5}) {
        const GradientReport rep = gnp_gradient(q, theta, GnpConfig::with_alpha(alpha, r));
        const ParamVector exact = oracle::exact_penalized_gradient(q, theta, alpha * r);
        CHECK(oracle::relative_error(rep.g, exact) <= 1e-10);
      }
    }
  }
}

TEST_CASE("O(r) consistency with lambda held fixed") {
  const double lambda = 0.04;
  const std::vector<double> rs{0.1, 0.05, 0.02, 0.01};

  SUBCASE("quartic") {
    const Quartic f;
    const ParamVector theta = ParamVector::flat({0.8, -0.5, 1.2, 0.1});
    const ParamVector exact = f.exact_penalized(theta, lambda);
    CHECK(oracle::relative_error(oracle::exact_penalized_gradient(f, theta, lambda), exact) < 1e-8);
    std::vector<double> errs;
    for (double r : rs) {
      errs.push_back(oracle::relative_error(gnp_gradient(f, theta, GnpConfig::with_lambda(lambda, r)).g, exact));
    }
    for (std::size_t i = 1; i < errs.size(); ++i) CHECK(errs[i] < errs[i - 1]);
    CHECK(slope(rs, errs) >= 0.8);
  }
  SUBCASE("small tanh MLP") {
    const ModelSpec spec = testing::mlp({2, 6, 2}, Activation::kTanh, 5);
    const ParamVector theta = init_params(spec);
    const Batch batch = testing::random_batch(12, 2, 2, 21);
    const MlpObjective obj(spec, batch);
    const ParamVector exact = oracle::exact_penalized_gradient(obj, theta, lambda);
    std::vector<double> errs;
    for (double r : rs) {
      errs.push_back(oracle::relative_error(gnp_gradient(obj, theta, GnpConfig::with_lambda(lambda, r)).g, exact));
    }
    for (std::size_t i = 1; i < errs.size(); ++i) CHECK(errs[i] < errs[i - 1]);
    CHECK(slope(rs, errs) >= 0.8);
  }
}

TEST_CASE("gnp_gradient divergence names the pass") {
  try {
    gnp_gradient(Cliff{}, ParamVector::flat({1.0}), GnpConfig::with_alpha(0.5));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.where() == "g2");
  }
  try {
    gnp_gradient(Cliff{}, ParamVector::flat({2.0}), GnpConfig::with_alpha(0.5));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.where() == "g1");
  }
}

TEST_CASE("train_step") {
  SUBCASE("plain SGD when momentum, decay and alpha are zero") {
    const ParamVector theta = ParamVector::flat({1.0, 1.0});
    GnpConfig cfg = GnpConfig::with_alpha(0.0);
    cfg.lr = 0.1;
    const StepResult res = train_step(OptimState::start(theta), diag14(), cfg);
    CHECK(res.state.params[0] == 1.0 - 0.1 * 1.0);
    CHECK(res.state.params[1] == 1.0 - 0.1 * 4.0);
    CHECK(res.state.step == 1);
    CHECK(res.lr == 0.1);
  }
  SUBCASE("momentum recurrence on a constant gradient") {
    const TapeObjective linear([](Tape& t, const std::vector<NodeId>& p) { return t.sum(p[0]); });
    GnpConfig cfg = GnpConfig::with_alpha(0.8);
    cfg.lr = 0.01;
    cfg.momentum = 0.9;
    OptimState s = OptimState::start(ParamVector::flat({0.5, -0.5, 2.0}));
    s = train_step(s, linear, cfg).state;
    s = train_step(s, linear, cfg).state;
    for (double v : s.velocity.values()) CHECK(v == doctest::Approx(1.9).epsilon(1e-15));
  }
  SUBCASE("decoupled weight decay acts on parameters, not on the loss") {
    const TapeObjective linear([](Tape& t, const std::vector<NodeId>& p) { return t.sum(p[0]); });
    GnpConfig cfg = GnpConfig::with_alpha(0.5);
    cfg.lr = 1.0;
    cfg.weight_decay = 0.1;
    const StepResult res = train_step(OptimState::start(ParamVector::flat({2.0})), linear, cfg);
    CHECK(res.report.g1[0] == 1.0);
    CHECK(res.state.velocity[0] == doctest::Approx(1.0 + 0.1 * 2.0));
  }
  SUBCASE("penalized loss decreases monotonically on a quadratic") {
    GnpConfig cfg = GnpConfig::with_alpha(0.8, 0.1);
    cfg.lr = 0.01;
    OptimState s = OptimState::start(ParamVector::flat({1.0, 1.0}));
    double prev = penalized_loss(diag14(), s.params, cfg);
    for (int t = 0; t < 100; ++t) {
      s = train_step(s, diag14(), cfg).state;
      const double now = penalized_loss(diag14(), s.params, cfg);
      CHECK(now < prev);
      prev = now;
    }
  }
  SUBCASE("zero gradient collapses to SGD without non-finite values") {
    GnpConfig cfg = GnpConfig::with_alpha(0.8);
    cfg.lr = 0.1;
    const StepResult res = train_step(OptimState::start(ParamVector::flat({0.0, 0.0})), diag14(), cfg);
    CHECK(res.state.params.all_finite());
    CHECK(res.report.g2.identical(res.report.g1));
    CHECK(l2_norm(res.state.params) == 0.0);
  }
  SUBCASE("divergence carries the step index") {
    GnpConfig cfg = GnpConfig::with_alpha(0.0);
    cfg.lr = 10.0;
    OptimState s = OptimState::start(ParamVector::flat({1.0, 1.0}));
    bool diverged = false;
    for (int t = 0; t < 1000 && !diverged; ++t) {
      try {
        s = train_step(s, diag14(), cfg).state;
      } catch (const DivergenceError& e) {
        diverged = true;
        CHECK(e.step() == s.step);
      }
    }
    CHECK(diverged);
  }
}

TEST_CASE("cosine schedule") {
  GnpConfig cfg = GnpConfig::with_alpha(0.8);
  cfg.lr = 0.4;
  cfg.total_steps = 100;
  CHECK(cosine_lr(0, cfg) == 0.4);
  CHECK(cosine_lr(100, cfg) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_lr(50, cfg) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK_THROWS_AS(cosine_lr(101, cfg), ConfigError);
  CHECK_THROWS_AS(cosine_lr(-1, cfg), ConfigError);
  for (std::int64_t t = 0; t <= 100; ++t) {
    CHECK(cosine_lr(t, cfg) >= 0.0);
    CHECK(cosine_lr(t, cfg) <= 0.4);
  }
  cfg.schedule = Schedule::kCosine;
  CHECK(scheduled_lr(250, cfg) == cosine_lr(100, cfg));
  cfg.schedule = Schedule::kConstant;
  CHECK(scheduled_lr(250, cfg) == 0.4);
}
