#include "gnp/objective.hpp"

#include "gnp/error.hpp"

namespace gnp {

double MlpObjective::loss(const ParamVector& params) const {
  return forward(model_, params, batch_).loss;
}

LossGrad MlpObjective::loss_and_gradient(const ParamVector& params) const {
  ForwardResult fwd = forward(model_, params, batch_);
  return LossGrad{fwd.loss, backward(fwd.tape)};
}

double TapeObjective::loss(const ParamVector& params) const {
  Tape tape;
  const auto ids = tape.bind(params);
  return tape.value(build_(tape, ids))[0];
}

LossGrad TapeObjective::loss_and_gradient(const ParamVector& params) const {
  Tape tape;
  const auto ids = tape.bind(params);
  const NodeId out = build_(tape, ids);
  tape.mark_output(out);
  return LossGrad{tape.value(out)[0], tape.backward()};
}

}  // namespace gnp
