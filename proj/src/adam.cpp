#include <cmath>
#include <stdexcept>

#include "cbonn/optimizers.hpp"

namespace cbonn {

std::vector<double> adam_direction(AdamState& state, std::span<const double> d) {
  if (d.size() != state.s.size()) throw DimensionError("gradient", state.s.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!std::isfinite(d[i])) throw NonFiniteError("non-finite gradient", i);

  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double k1 = static_cast<double>(state.step + 1);
  const double corr1 = 1.0 - std::pow(b1, k1);
  const double corr2 = 1.0 - std::pow(b2, k1);

  std::vector<double> dir(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    state.s[i] = b1 * state.s[i] + (1.0 - b1) * d[i];
    state.r[i] = b2 * state.r[i] + (1.0 - b2) * d[i] * d[i];
    const double s_hat = state.s[i] / corr1;
    const double r_hat = state.r[i] / corr2;
    dir[i] = s_hat / (std::sqrt(r_hat) + state.cfg.delta);
  }
  ++state.step;
  return dir;
}

void adam_step(AdamState& state, ParamVector& params, std::span<const double> d, double dt) {
  if (params.size() != state.s.size())
    throw DimensionError("parameter vector", state.s.size(), params.size());
  const auto dir = adam_direction(state, d);
  auto theta = params.values();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = theta[i] - dt * dir[i];
}

ParamVector fan_in_uniform_init(const NetworkShape& shape, std::uint64_t seed) {
  ParamVector p(shape);
  RngStream rng(seed, StreamDomain::Init, 0);
  const double hidden = 1.0 / std::sqrt(static_cast<double>(shape.input_dim));
  const double output = 1.0 / std::sqrt(static_cast<double>(shape.width));
  const std::size_t a = shape.atom_dim();
  for (std::size_t m = 0; m < shape.width; ++m) {
    for (std::size_t j = 0; j <= shape.input_dim; ++j) p[m * a + j] = rng.uniform(-hidden, hidden);
    for (std::size_t k = 0; k < shape.output_dim; ++k)
      p[m * a + shape.input_dim + 1 + k] = rng.uniform(-output, output);
  }
  return p;
}

}  // namespace cbonn
