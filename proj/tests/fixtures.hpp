#pragma once

#include <cmath>
#include <vector>

#include "gnp/data.hpp"
#include "gnp/mlp.hpp"
#include "gnp/param_vector.hpp"
#include "gnp/rng.hpp"

namespace gnp::testing {

// theta_i = 0.5 sin(1.7 i + 0.3)
inline ParamVector formula_params(const ModelSpec& spec) {
  ParamVector p(spec.layout());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.5 * std::sin(1.7 * static_cast<double>(i) + 0.3);
  return p;
}

// x_{r,c} = cos(0.9 r + 0.4 c), label r mod classes
inline Batch formula_batch(std::size_t rows, std::size_t features, int classes) {
  Tensor x({rows, features});
  std::vector<int> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < features; ++c) {
      x.at(r, c) = std::cos(0.9 * static_cast<double>(r) + 0.4 * static_cast<double>(c));
    }
    y[r] = static_cast<int>(r % static_cast<std::size_t>(classes));
  }
  return Batch{std::move(x), std::move(y)};
}

inline Batch random_batch(std::size_t rows, std::size_t features, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<int> label(0, classes - 1);
  Tensor x({rows, features});
  std::vector<int> y(rows);
  for (double& v : x.values()) v = gauss(rng);
  for (int& v : y) v = label(rng);
  return Batch{std::move(x), std::move(y)};
}

inline ModelSpec mlp(std::vector<std::size_t> sizes, Activation act = Activation::kTanh,
                     std::uint64_t seed = 0, InitScheme init = InitScheme::kGlorot) {
  ModelSpec m;
  m.layer_sizes = std::move(sizes);
  m.activation = act;
  m.seed = seed;
  m.init = init;
  return m;
}

}  // namespace gnp::testing
