#include "gnp/mlp.hpp"

#include <cmath>

#include "gnp/error.hpp"
#include "gnp/rng.hpp"

namespace gnp {

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name + "'");
}

InitScheme parse_init_scheme(const std::string& name) {
  if (name == "he") return InitScheme::kHe;
  if (name == "glorot") return InitScheme::kGlorot;
  throw ConfigError("unknown init scheme '" + name + "'");
}

std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }
std::string to_string(InitScheme s) { return s == InitScheme::kHe ? "he" : "glorot"; }

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("model needs at least input and output sizes");
  for (std::size_t n : layer_sizes) {
    if (n == 0) throw ConfigError("layer sizes must be positive");
  }
}

SegmentTable ModelSpec::layout() const {
  validate();
  SegmentTable t;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    t.append(prefix + ".weight", {layer_sizes[l], layer_sizes[l + 1]});
    t.append(prefix + ".bias", {layer_sizes[l + 1]});
  }
  return t;
}

ParamVector init_params(const ModelSpec& spec) {
  ParamVector params(spec.layout());
  Rng rng(spec.seed);
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const auto fan_in = static_cast<double>(spec.layer_sizes[l]);
    const auto fan_out = static_cast<double>(spec.layer_sizes[l + 1]);
    auto weights = params.segment(2 * l);
    if (spec.init == InitScheme::kHe) {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (double& w : weights) w = dist(rng);
    } else {
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& w : weights) w = dist(rng);
    }
  }
  return params;
}

namespace {

void check_compatible(const ModelSpec& model, const ParamVector& params, const Batch& batch) {
  if (!(params.layout() == model.layout())) {
    throw ShapeError("parameter layout does not match the model spec");
  }
  batch.validate(model.classes());
  if (batch.features() != model.inputs()) {
    throw ShapeError("batch has " + std::to_string(batch.features()) + " features, model expects " +
                     std::to_string(model.inputs()));
  }
}

}  // namespace

ForwardResult forward(const ModelSpec& model, const ParamVector& params, const Batch& batch) {
  check_compatible(model, params, batch);
  ForwardResult out;
  Tape& tape = out.tape;
  NodeId h = tape.input(batch.inputs);
  const auto ids = tape.bind(params);
  const std::size_t layers = model.layer_sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    h = tape.add_bias(tape.matmul(h, ids[2 * l]), ids[2 * l + 1]);
    if (l + 1 < layers) {
      h = model.activation == Activation::kTanh ? tape.tanh(h) : tape.relu(h);
    }
  }
  out.logits = h;
  if (!tape.value(h).all_finite()) throw DivergenceError("forward logits");
  const NodeId loss = tape.mean(tape.softmax_cross_entropy(h, batch.labels));
  tape.mark_output(loss);
  out.loss = tape.value(loss)[0];
  if (!std::isfinite(out.loss)) throw DivergenceError("forward loss");
  return out;
}

Tensor predict_logits(const ModelSpec& model, const ParamVector& params, const Tensor& inputs) {
  if (!(params.layout() == model.layout())) {
    throw ShapeError("parameter layout does not match the model spec");
  }
  if (inputs.rank() != 2 || inputs.cols() != model.inputs()) {
    throw ShapeError("inputs " + shape_string(inputs.shape()) + " do not match the model");
  }
  Tensor h = inputs;
  const std::size_t layers = model.layer_sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto w = params.segment(2 * l);
    const auto b = params.segment(2 * l + 1);
    const std::size_t in = model.layer_sizes[l], width = model.layer_sizes[l + 1];
    Tensor next({h.rows(), width});
    for (std::size_t r = 0; r < h.rows(); ++r) {
      double* row = &next.at(r, 0);
      for (std::size_t c = 0; c < width; ++c) row[c] = b[c];
      for (std::size_t p = 0; p < in; ++p) {
        const double hv = h.at(r, p);
        for (std::size_t c = 0; c < width; ++c) row[c] += hv * w[p * width + c];
      }
      if (l + 1 < layers) {
        for (std::size_t c = 0; c < width; ++c) {
          row[c] = model.activation == Activation::kTanh ? std::tanh(row[c])
                                                         : (row[c] > 0.0 ? row[c] : 0.0);
        }
      }
    }
    h = std::move(next);
  }
  return h;
}

double error_rate(const ModelSpec& model, const ParamVector& params, const Batch& batch) {
  const Tensor logits = predict_logits(model, params, batch.inputs);
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (logits.at(r, c) > logits.at(r, best)) best = c;
    }
    if (static_cast<int>(best) != batch.labels[r]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(logits.rows());
}

}  // namespace gnp
