#include "grotta/adam.hpp"

#include "grotta/errors.hpp"

#include <cmath>

namespace grotta {

void adam_step(std::span<const std::span<double>> params,
               const std::vector<Vector> &grads, AdamState &state) {
  if (params.size() != grads.size())
    throw ShapeMismatch("adam_step: parameter and gradient counts differ");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t a = 0; a < params.size(); ++a) {
      state.m[a].assign(params[a].size(), 0.0);
      state.v[a].assign(params[a].size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw ShapeMismatch("adam_step: optimizer state tracks a different parameter set");
  for (std::size_t a = 0; a < params.size(); ++a)
    if (grads[a].size() != params[a].size() || state.m[a].size() != params[a].size())
      throw ShapeMismatch("adam_step: array " + std::to_string(a) + " size mismatch");

  const AdamConfig &cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t a = 0; a < params.size(); ++a) {
    auto &m = state.m[a];
    auto &v = state.v[a];
    for (std::size_t k = 0; k < params[a].size(); ++k) {
      const double g = grads[a][k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      params[a][k] -= cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

} // namespace grotta
