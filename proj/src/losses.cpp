#include "grotta/losses.hpp"

#include "grotta/errors.hpp"
#include "grotta/kernels.hpp"

#include <cmath>

namespace grotta {

LossAndGrad cross_entropy(const Matrix &logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows())
    throw ShapeMismatch("cross_entropy: one label per row required");
  if (logits.rows() == 0)
    throw EmptyBatch("cross_entropy on an empty batch");
  const Matrix logp = log_softmax_rows(logits);
  const double w = 1.0 / static_cast<double>(logits.rows());
  LossAndGrad r{0.0, Matrix(logits.rows(), logits.cols())};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (labels[i] >= logits.cols())
      throw InvalidClass("label out of range");
    r.value -= w * logp(i, labels[i]);
    for (std::size_t c = 0; c < logits.cols(); ++c)
      r.grad_logits(i, c) = w * std::exp(logp(i, c));
    r.grad_logits(i, labels[i]) -= w;
  }
  return r;
}

LossAndGrad mean_entropy(const Matrix &logits) {
  if (logits.rows() == 0)
    throw EmptyBatch("entropy on an empty batch");
  const Matrix logp = log_softmax_rows(logits);
  const double w = 1.0 / static_cast<double>(logits.rows());
  LossAndGrad r{0.0, Matrix(logits.rows(), logits.cols())};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double h = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c)
      h -= std::exp(logp(i, c)) * logp(i, c);
    r.value += w * h;
    // dH/dz_c = -p_c (log p_c + H)
    for (std::size_t c = 0; c < logits.cols(); ++c)
      r.grad_logits(i, c) = -w * std::exp(logp(i, c)) * (logp(i, c) + h);
  }
  return r;
}

LossAndGrad soft_cross_entropy(const Matrix &targets, const Matrix &logits,
                               double row_weight) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols())
    throw ShapeMismatch("soft_cross_entropy: targets and logits differ in shape");
  const std::size_t n = logits.rows(), c = logits.cols();
  const Matrix logp = log_softmax_rows(logits);
  const double floor = std::log(kLogFloor);
  const double scale = row_weight / static_cast<double>(c);
  LossAndGrad r{0.0, Matrix(n, c)};
  for (std::size_t i = 0; i < n; ++i) {
    // d/dz of -sum_k t_k log p_k over unclamped k is p * sum(t) - t
    double active_mass = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      if (logp(i, k) > floor) {
        r.value -= scale * targets(i, k) * logp(i, k);
        active_mass += targets(i, k);
      } else {
        r.value -= scale * targets(i, k) * floor;
      }
    }
    for (std::size_t k = 0; k < c; ++k) {
      const double t = logp(i, k) > floor ? targets(i, k) : 0.0;
      r.grad_logits(i, k) = scale * (std::exp(logp(i, k)) * active_mass - t);
    }
  }
  return r;
}

} // namespace grotta
