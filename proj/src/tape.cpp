#include "gnp/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gnp/error.hpp"

namespace gnp {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

// out[m x n] (+)= a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

// out[m x k] += g[m x n] * b[k x n]^T
void gemm_nt(const double* g, const double* b, double* out, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      out[i * k + p] += acc;
    }
  }
}

// out[k x n] += a[m x k]^T * g[m x n]
void gemm_tn(const double* a, const double* g, double* out, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
    }
  }
}

}  // namespace

Tape::Node Tape::make(OpKind kind, std::vector<NodeId> inputs, Tensor value) {
  Node n;
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  return n;
}

NodeId Tape::push(Node node) {
  for (NodeId in : node.inputs) {
    require(in < nodes_.size(), "tape input id out of range");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

const Tape::Node& Tape::node(NodeId id) const {
  require(id < nodes_.size(), "unknown tape node " + std::to_string(id));
  return nodes_[id];
}

NodeId Tape::input(Tensor value) {
  Node n = make(OpKind::kInput, {}, std::move(value));
  return push(std::move(n));
}

std::vector<NodeId> Tape::bind(const ParamVector& params) {
  if (layout_) throw Error("tape parameters already bound");
  layout_ = params.shared_layout();
  std::vector<NodeId> ids;
  ids.reserve(params.layout().count());
  for (std::size_t i = 0; i < params.layout().count(); ++i) {
    Node n = make(OpKind::kParam, {}, params.segment_tensor(i));
    n.requires_grad = true;
    n.segment = i;
    ids.push_back(push(std::move(n)));
  }
  return ids;
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& x = node(a).value;
  const Tensor& w = node(b).value;
  require(x.rank() == 2 && w.rank() == 2 && x.cols() == w.rows(),
          "matmul shape mismatch " + shape_string(x.shape()) + " x " + shape_string(w.shape()));
  Tensor out({x.rows(), w.cols()});
  gemm_nn(x.values().data(), w.values().data(), out.values().data(), x.rows(), x.cols(),
          w.cols());
  return push(make(OpKind::kMatMul, {a, b}, std::move(out)));
}

NodeId Tape::add_bias(NodeId x, NodeId bias) {
  const Tensor& xv = node(x).value;
  const Tensor& bv = node(bias).value;
  require(xv.rank() == 2 && bv.size() == xv.cols(),
          "bias shape " + shape_string(bv.shape()) + " does not match " + shape_string(xv.shape()));
  Tensor out = xv;
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t c = 0; c < xv.cols(); ++c) out.at(r, c) += bv[c];
  }
  return push(make(OpKind::kAddBias, {x, bias}, std::move(out)));
}

NodeId Tape::tanh(NodeId x) {
  Tensor out = node(x).value;
  for (double& v : out.values()) v = std::tanh(v);
  return push(make(OpKind::kTanh, {x}, std::move(out)));
}

NodeId Tape::relu(NodeId x) {
  Tensor out = node(x).value;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return push(make(OpKind::kRelu, {x}, std::move(out)));
}

NodeId Tape::softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
  const Tensor& z = node(logits).value;
  require(z.rank() == 2, "softmax_cross_entropy expects [B x C] logits");
  require(labels.size() == z.rows(), "label count does not match batch size");
  const std::size_t classes = z.cols();
  Tensor probs(z.shape());
  Tensor loss({z.rows()});
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const int y = labels[r];
    require(y >= 0 && static_cast<std::size_t>(y) < classes,
            "label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    double zmax = z.at(r, 0);
    for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, z.at(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double e = std::exp(z.at(r, c) - zmax);
      probs.at(r, c) = e;
      denom += e;
    }
    for (std::size_t c = 0; c < classes; ++c) probs.at(r, c) /= denom;
    loss[r] = std::log(denom) + zmax - z.at(r, static_cast<std::size_t>(y));
  }
  Node n = make(OpKind::kSoftmaxXent, {logits}, std::move(loss));
  n.labels = std::move(labels);
  n.saved = std::move(probs);
  return push(std::move(n));
}

NodeId Tape::mean(NodeId x) {
  const Tensor& v = node(x).value;
  double acc = 0.0;
  for (double e : v.values()) acc += e;
  return push(make(OpKind::kMean, {x}, Tensor::scalar(acc / static_cast<double>(v.size()))));
}

NodeId Tape::sum(NodeId x) {
  double acc = 0.0;
  for (double e : node(x).value.values()) acc += e;
  return push(make(OpKind::kSum, {x}, Tensor::scalar(acc)));
}

NodeId Tape::scale(NodeId x, double factor) {
  Tensor out = node(x).value;
  for (double& v : out.values()) v *= factor;
  Node n = make(OpKind::kScale, {x}, std::move(out));
  n.factor = factor;
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  require(av.shape() == bv.shape(), "add shape mismatch");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return push(make(OpKind::kAdd, {a, b}, std::move(out)));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  require(av.shape() == bv.shape(), "mul shape mismatch");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return push(make(OpKind::kMul, {a, b}, std::move(out)));
}

void Tape::mark_output(NodeId id) {
  require(id < nodes_.size(), "output id out of range");
  if (nodes_[id].value.size() != 1) throw Error("tape output must be a scalar");
  output_ = id;
}

ParamVector Tape::backward() {
  if (!output_) throw Error("backward on a tape with no marked output");
  if (replayed_) throw Error("tape already replayed; call reset() first");
  if (!layout_) throw Error("backward on a tape with no bound parameters");
  replayed_ = true;

  std::vector<Tensor> adj(nodes_.size());
  auto grad_of = [&](NodeId id) -> Tensor& {
    if (adj[id].size() == 0) adj[id] = Tensor(nodes_[id].value.shape());
    return adj[id];
  };
  grad_of(*output_)[0] = 1.0;

  ParamVector grads(layout_, std::vector<double>(layout_->total(), 0.0));

  for (NodeId id = *output_ + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || adj[id].size() == 0) continue;
    const Tensor& g = adj[id];
    switch (n.kind) {
      case OpKind::kInput:
        break;
      case OpKind::kParam: {
        auto dst = grads.segment(n.segment);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
        break;
      }
      case OpKind::kMatMul: {
        const Node& a = nodes_[n.inputs[0]];
        const Node& b = nodes_[n.inputs[1]];
        const std::size_t m = a.value.rows(), k = a.value.cols(), cols = b.value.cols();
        if (a.requires_grad) {
          gemm_nt(g.values().data(), b.value.values().data(),
                  grad_of(n.inputs[0]).values().data(), m, cols, k);
        }
        if (b.requires_grad) {
          gemm_tn(a.value.values().data(), g.values().data(),
                  grad_of(n.inputs[1]).values().data(), m, k, cols);
        }
        break;
      }
      case OpKind::kAddBias: {
        if (nodes_[n.inputs[0]].requires_grad) {
          Tensor& gx = grad_of(n.inputs[0]);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (nodes_[n.inputs[1]].requires_grad) {
          Tensor& gb = grad_of(n.inputs[1]);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g.at(r, c);
          }
        }
        break;
      }
      case OpKind::kTanh: {
        Tensor& gx = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          gx[i] += g[i] * (1.0 - y * y);
        }
        break;
      }
      case OpKind::kRelu: {
        Tensor& gx = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (n.value[i] > 0.0) gx[i] += g[i];
        }
        break;
      }
      case OpKind::kSoftmaxXent: {
        Tensor& gz = grad_of(n.inputs[0]);
        const Tensor& p = n.saved;
        for (std::size_t r = 0; r < p.rows(); ++r) {
          const auto y = static_cast<std::size_t>(n.labels[r]);
          for (std::size_t c = 0; c < p.cols(); ++c) {
            gz.at(r, c) += g[r] * (p.at(r, c) - (c == y ? 1.0 : 0.0));
          }
        }
        break;
      }
      case OpKind::kMean: {
        Tensor& gx = grad_of(n.inputs[0]);
        const double share = g[0] / static_cast<double>(gx.size());
        for (double& v : gx.values()) v += share;
        break;
      }
      case OpKind::kSum: {
        Tensor& gx = grad_of(n.inputs[0]);
        for (double& v : gx.values()) v += g[0];
        break;
      }
      case OpKind::kScale: {
        Tensor& gx = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.factor * g[i];
        break;
      }
      case OpKind::kAdd: {
        for (NodeId in : n.inputs) {
          if (!nodes_[in].requires_grad) continue;
          Tensor& gx = grad_of(in);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        break;
      }
      case OpKind::kMul: {
        const NodeId a = n.inputs[0], b = n.inputs[1];
        if (nodes_[a].requires_grad) {
          Tensor& ga = grad_of(a);
          const Tensor& bv = nodes_[b].value;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (nodes_[b].requires_grad) {
          Tensor& gb = grad_of(b);
          const Tensor& av = nodes_[a].value;
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
        break;
      }
    }
  }
  return grads;
}

ParamVector backward(Tape& tape) { return tape.backward(); }

}  // namespace gnp
