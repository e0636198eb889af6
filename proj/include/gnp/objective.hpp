#pragma once

#include <functional>
#include <vector>

#include "gnp/data.hpp"
#include "gnp/mlp.hpp"
#include "gnp/param_vector.hpp"
#include "gnp/tape.hpp"

namespace gnp {

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// A differentiable scalar L(theta). Everything downstream (the penalized
/// step, the oracles, the flatness probes) is written against this.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double loss(const ParamVector& params) const = 0;
  virtual LossGrad loss_and_gradient(const ParamVector& params) const = 0;

  ParamVector gradient(const ParamVector& params) const {
    return loss_and_gradient(params).grad;
  }
};

/// Mean cross-entropy of an MLP on a fixed batch. Holds references; the model
/// and batch must outlive it.
class MlpObjective final : public Objective {
 public:
  MlpObjective(const ModelSpec& model, const Batch& batch) : model_(model), batch_(batch) {}

  double loss(const ParamVector& params) const override;
  LossGrad loss_and_gradient(const ParamVector& params) const override;

  const ModelSpec& model() const noexcept { return model_; }
  const Batch& batch() const noexcept { return batch_; }

 private:
  const ModelSpec& model_;
  const Batch& batch_;
};

/// Objective whose computation is recorded by a user callback; the callback
/// receives one node per parameter segment and returns the scalar output.
class TapeObjective final : public Objective {
 public:
  using Builder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

  explicit TapeObjective(Builder build) : build_(std::move(build)) {}

  double loss(const ParamVector& params) const override;
  LossGrad loss_and_gradient(const ParamVector& params) const override;

 private:
  Builder build_;
};

}  // namespace gnp
