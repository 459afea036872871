#pragma once

#include "grotta/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace grotta {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<Vector> m; // first moments, sized on first step
  std::vector<Vector> v; // second moments
};

// One bias-corrected Adam update, in place.
void adam_step(std::span<const std::span<double>> params,
               const std::vector<Vector> &grads, AdamState &state);

} // namespace grotta
