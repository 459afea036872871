#pragma once

#include "grotta/matrix.hpp"

#include <cstddef>
#include <span>

namespace grotta {

struct LossAndGrad {
  double value = 0.0;
  Matrix grad_logits;
};

// Mean cross-entropy of integer labels.
LossAndGrad cross_entropy(const Matrix &logits, std::span<const std::size_t> labels);

// Mean Shannon entropy of the softmax predictions.
LossAndGrad mean_entropy(const Matrix &logits);

inline constexpr double kLogFloor = 1e-12;

// Per-row  -(1/C) * sum_c targets(i,c) * log p(c | logits_i), with log p
// floored at log(1e-12). Targets are treated as constants. `row_weight`
// scales every row's contribution (use 1/B for a batch mean).
LossAndGrad soft_cross_entropy(const Matrix &targets, const Matrix &logits,
                               double row_weight);

} // namespace grotta
