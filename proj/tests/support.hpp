#pragma once

// Hand-rolled generators and naive oracles shared by the unit tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cbonn/dataset.hpp"
#include "cbonn/network.hpp"
#include "cbonn/rng.hpp"

namespace testing {

using namespace cbonn;

inline RngStream fixture(std::uint64_t index, std::uint64_t seed = 99) {
  return RngStream(seed, StreamDomain::Fixture, index);
}

inline std::size_t pick(RngStream& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng.engine());
}

inline ParamVector random_params(RngStream& rng, const NetworkShape& sh, double lo = -1, double hi = 1) {
  ParamVector p(sh);
  for (double& v : p.values()) v = rng.uniform(lo, hi);
  return p;
}

inline Dataset regression_data(RngStream& rng, std::size_t d, std::size_t samples) {
  Dataset data;
  data.name = "fixture";
  data.input_dim = d;
  data.output_dim = 1;
  for (std::size_t i = 0; i < samples * d; ++i) data.inputs.push_back(rng.uniform(-1, 1));
  for (std::size_t s = 0; s < samples; ++s) data.targets.push_back(rng.normal());
  return data;
}

inline Dataset class_data(RngStream& rng, std::size_t d, std::size_t classes, std::size_t samples) {
  Dataset data;
  data.name = "fixture";
  data.input_dim = d;
  data.output_dim = classes;
  data.target_kind = TargetKind::ClassIndex;
  for (std::size_t i = 0; i < samples * d; ++i) data.inputs.push_back(rng.uniform(-1, 1));
  for (std::size_t s = 0; s < samples; ++s)
    data.labels.push_back(static_cast<std::uint32_t>(pick(rng, 0, classes - 1)));
  return data;
}

// Per-neuron loop written straight from g(x) = (1/M) sum_m c_m relu(w_m . x + b_m).
inline std::vector<double> naive_forward(const ParamVector& p, const std::vector<double>& x) {
  const auto& sh = p.shape();
  std::vector<double> y(sh.output_dim, 0.0);
  for (std::size_t m = 0; m < sh.width; ++m) {
    const auto a = p.neuron(m);
    double z = a[sh.input_dim];
    for (std::size_t k = 0; k < sh.input_dim; ++k) z += a[k] * x[k];
    const double h = z > 0 ? z : 0.0;
    for (std::size_t c = 0; c < sh.output_dim; ++c) y[c] += a[sh.input_dim + 1 + c] * h;
  }
  for (double& v : y) v /= static_cast<double>(sh.width);
  return y;
}

inline std::vector<double> input_of(const Dataset& d, std::size_t s) {
  const auto x = d.input(s);
  return {x.begin(), x.end()};
}

}  // namespace testing
