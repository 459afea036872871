// Straightforward single-threaded versions of the dense kernels. Kept as
// the reference the parallel kernels are checked against; the loop order
// over the reduction index matches so results are bit-identical.

#include "grotta/errors.hpp"
#include "grotta/kernels.hpp"

#include <cmath>
#include <utility>

namespace grotta::serial {

Matrix matmul(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.rows())
    throw ShapeMismatch("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p)
        s += a(i, p) * b(p, j);
      out(i, j) = s;
    }
  return out;
}

Matrix matmul_at_b(const Matrix &a, const Matrix &b) {
  if (a.rows() != b.rows())
    throw ShapeMismatch("matmul_at_b: inner dimensions differ");
  Matrix out(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.rows(); ++p)
        s += a(p, i) * b(p, j);
      out(i, j) = s;
    }
  return out;
}

Matrix matmul_a_bt(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.cols())
    throw ShapeMismatch("matmul_a_bt: inner dimensions differ");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p)
        s += a(i, p) * b(j, p);
      out(i, j) = s;
    }
  return out;
}

Matrix log_softmax_rows(const Matrix &logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 1; j < logits.cols(); ++j)
      mx = std::max(mx, logits(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j)
      s += std::exp(logits(i, j) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < logits.cols(); ++j)
      out(i, j) = logits(i, j) - lse;
  }
  return out;
}

Matrix softmax_rows(const Matrix &logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 1; j < logits.cols(); ++j)
      mx = std::max(mx, logits(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      out(i, j) = std::exp(logits(i, j) - mx);
      s += out(i, j);
    }
    for (std::size_t j = 0; j < logits.cols(); ++j)
      out(i, j) /= s;
  }
  return out;
}

Matrix pairwise_sq_dist(const Matrix &features) {
  const std::size_t n = features.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j)
        continue;
      double s = 0.0;
      for (std::size_t p = 0; p < features.cols(); ++p) {
        const double diff = features(i, p) - features(j, p);
        s += diff * diff;
      }
      out(i, j) = s;
    }
  return out;
}

Matrix solve_linear(const Matrix &a, const Matrix &b) {
  if (a.rows() != a.cols() || b.rows() != a.rows())
    throw ShapeMismatch("solve_linear: incompatible shapes");
  const std::size_t n = a.rows(), m = b.cols();
  Matrix lu = a, x = b;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k)))
        piv = i;
    if (std::abs(lu(piv, k)) < kPivotTolerance)
      throw SingularMatrix("pivot below tolerance");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j)
        std::swap(lu(k, j), lu(piv, j));
      for (std::size_t j = 0; j < m; ++j)
        std::swap(x(k, j), x(piv, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      if (f == 0.0)
        continue;
      lu(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j)
        lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < m; ++j)
        x(i, j) -= f * x(k, j);
    }
  }
  for (std::size_t ii = n; ii-- > 0;)
    for (std::size_t j = 0; j < m; ++j) {
      double s = x(ii, j);
      for (std::size_t p = ii + 1; p < n; ++p)
        s -= lu(ii, p) * x(p, j);
      x(ii, j) = s / lu(ii, ii);
    }
  return x;
}

} // namespace grotta::serial
