#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "gnp/param_vector.hpp"
#include "gnp/tensor.hpp"

namespace gnp {

using NodeId = std::size_t;

enum class OpKind : std::uint8_t {
  kInput,
  kParam,
  kMatMul,
  kAddBias,
  kTanh,
  kRelu,
  kSoftmaxXent,
  kMean,
  kSum,
  kScale,
  kAdd,
  kMul,
};

/// Append-only record of a scalar computation. Node ids increase
/// monotonically and every input id is smaller than its consumer's id, so the
/// reverse of insertion order is a valid backward schedule.
///
/// Gradients accumulate in fixed index order; two identical tapes always
/// produce bit-identical gradients.
class Tape {
 public:
  Tape() = default;

  /// Constant leaf (data, labels live outside the tape).
  NodeId input(Tensor value);

  /// One leaf per parameter segment; the order of the returned ids matches the
  /// segment order of `params`. May be called at most once per tape.
  std::vector<NodeId> bind(const ParamVector& params);

  NodeId matmul(NodeId a, NodeId b);
  /// x[B x n] + bias[n] broadcast over rows.
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId tanh(NodeId x);
  NodeId relu(NodeId x);
  /// Per-row cross entropy of softmax(logits[B x C]) against integer labels,
  /// computed with the log-sum-exp shift. Output shape [B].
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels);
  NodeId mean(NodeId x);
  NodeId sum(NodeId x);
  NodeId scale(NodeId x, double factor);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);

  void mark_output(NodeId id);
  std::optional<NodeId> output() const noexcept { return output_; }

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Reverse sweep from the marked output. Returns d(output)/d(params) laid out
  /// like the vector passed to bind(). A tape may be replayed once; call
  /// reset() to replay again.
  ParamVector backward();
  void reset() noexcept { replayed_ = false; }
  bool replayed() const noexcept { return replayed_; }

 private:
  struct Node {
    OpKind kind = OpKind::kInput;
    std::vector<NodeId> inputs;
    Tensor value;
    bool requires_grad = false;
    double factor = 0.0;        // kScale
    std::size_t segment = 0;    // kParam
    std::vector<int> labels;    // kSoftmaxXent
    Tensor saved;               // kSoftmaxXent: softmax probabilities
  };

  static Node make(OpKind kind, std::vector<NodeId> inputs, Tensor value);
  NodeId push(Node node);
  const Node& node(NodeId id) const;

  std::vector<Node> nodes_;
  std::optional<NodeId> output_;
  std::shared_ptr<const SegmentTable> layout_;
  bool replayed_ = false;
};

/// Free-function spelling of Tape::backward().
ParamVector backward(Tape& tape);

}  // namespace gnp
