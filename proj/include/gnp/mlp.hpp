#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnp/data.hpp"
#include "gnp/param_vector.hpp"
#include "gnp/tape.hpp"

namespace gnp {

enum class Activation { kTanh, kRelu };
enum class InitScheme { kHe, kGlorot };

Activation parse_activation(const std::string& name);
InitScheme parse_init_scheme(const std::string& name);
std::string to_string(Activation a);
std::string to_string(InitScheme s);

/// Fully connected classifier: layer_sizes = {inputs, hidden..., classes}.
struct ModelSpec {
  std::vector<std::size_t> layer_sizes{2, 64, 64, 2};
  Activation activation = Activation::kTanh;
  InitScheme init = InitScheme::kGlorot;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t inputs() const { return layer_sizes.front(); }
  int classes() const { return static_cast<int>(layer_sizes.back()); }
  /// Segments "layer<i>.weight" [in x out] and "layer<i>.bias" [out].
  SegmentTable layout() const;
};

/// Weights from the seeded generator per the init scheme, biases zero.
ParamVector init_params(const ModelSpec& spec);

struct ForwardResult {
  double loss = 0.0;
  Tape tape;
  NodeId logits = 0;
};

/// Mean softmax cross-entropy of the model over `batch`, with the tape needed
/// for backward(). Throws ShapeError on layout mismatch and DivergenceError on
/// non-finite logits or loss.
ForwardResult forward(const ModelSpec& model, const ParamVector& params, const Batch& batch);

/// Logits without recording a tape.
Tensor predict_logits(const ModelSpec& model, const ParamVector& params, const Tensor& inputs);
/// Fraction of rows whose argmax logit differs from the label.
double error_rate(const ModelSpec& model, const ParamVector& params, const Batch& batch);

}  // namespace gnp
