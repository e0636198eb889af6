#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gnp/harness/config.hpp"
#include "gnp/param_vector.hpp"
#include "json.hpp"

namespace gnp::harness {

using CombineFn = std::function<ParamVector(const ParamVector&, const ParamVector&, double)>;

struct CheckResult {
  std::string name;
  std::string description;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string comparison;  // "<=" or ">="
  bool passed = false;
  nlohmann::json detail = nlohmann::json::object();
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const;
  const CheckResult& find(const std::string& name) const;
};

struct VerifyOptions {
  /// Combination rule under test; swapped out by mutation fixtures.
  CombineFn combine = combine_gradients;
  std::function<void(const CheckResult&)> on_check;
};

/// Gradient checks, Hessian-product order of accuracy, quadratic exactness,
/// O(r) consistency, the norm-gradient identity, reduction identities and
/// run determinism.
VerifyReport run_verify(const VerifyOptions& opts = {});
nlohmann::json to_json(const VerifyReport& report);

/// Final parameters of a run trained by a plain loop that does not go through
/// the penalized step: SGD on g1 (sam = false) or on the gradient at
/// theta + r g1 / ||g1|| (sam = true). Same batches, schedule and update rule
/// as train_run. Throws DivergenceError on non-finite values.
ParamVector reference_run(const RunConfig& cfg, bool sam);

/// Small run configuration used by the built-in determinism and reduction
/// checks.
RunConfig tiny_run_config();

}  // namespace gnp::harness
