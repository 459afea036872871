#include "grotta/kernels.hpp"

#include "grotta/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace grotta {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 14;

void check_inner(std::size_t lhs, std::size_t rhs, const char *op) {
  if (lhs != rhs)
    throw ShapeMismatch(std::string(op) + ": inner dimensions " +
                        std::to_string(lhs) + " and " + std::to_string(rhs));
}

} // namespace

Matrix matmul(const Matrix &a, const Matrix &b) {
  check_inner(a.cols(), b.rows(), "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix out(n, m);
  const double *pa = a.data().data();
  const double *pb = b.data().data();
  double *po = out.data().data();
#pragma omp parallel for schedule(static) if (n * k * m > kParallelWork)
  for (std::size_t i = 0; i < n; ++i) {
    double *orow = po + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      const double *brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j)
        orow[j] += aip * brow[j];
    }
  }
  return out;
}

Matrix matmul_at_b(const Matrix &a, const Matrix &b) {
  check_inner(a.rows(), b.rows(), "matmul_at_b");
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  Matrix out(n, m);
  const double *pa = a.data().data();
  const double *pb = b.data().data();
  double *po = out.data().data();
#pragma omp parallel for schedule(static) if (n * k * m > kParallelWork)
  for (std::size_t i = 0; i < n; ++i) {
    double *orow = po + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double api = pa[p * n + i];
      const double *brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j)
        orow[j] += api * brow[j];
    }
  }
  return out;
}

Matrix matmul_a_bt(const Matrix &a, const Matrix &b) {
  check_inner(a.cols(), b.cols(), "matmul_a_bt");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Matrix out(n, m);
  const double *pa = a.data().data();
  const double *pb = b.data().data();
  double *po = out.data().data();
#pragma omp parallel for schedule(static) if (n * k * m > kParallelWork)
  for (std::size_t i = 0; i < n; ++i) {
    const double *arow = pa + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double *brow = pb + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p)
        s += arow[p] * brow[p];
      po[i * m + j] = s;
    }
  }
  return out;
}

Matrix log_softmax_rows(const Matrix &logits) {
  Matrix out(logits.rows(), logits.cols());
  const std::size_t n = logits.rows(), c = logits.cols();
#pragma omp parallel for schedule(static) if (n * c > kParallelWork)
  for (std::size_t i = 0; i < n; ++i) {
    auto in = logits.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      s += std::exp(in[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j)
      o[j] = in[j] - lse;
  }
  return out;
}

Matrix softmax_rows(const Matrix &logits) {
  Matrix out(logits.rows(), logits.cols());
  const std::size_t n = logits.rows(), c = logits.cols();
#pragma omp parallel for schedule(static) if (n * c > kParallelWork)
  for (std::size_t i = 0; i < n; ++i) {
    auto in = logits.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - mx);
      s += o[j];
    }
    for (std::size_t j = 0; j < c; ++j)
      o[j] /= s;
  }
  return out;
}

Matrix pairwise_sq_dist(const Matrix &features) {
  const std::size_t n = features.rows(), d = features.cols();
  Matrix out(n, n);
#pragma omp parallel for schedule(static) if (n * n * d > kParallelWork)
  for (std::size_t i = 0; i < n; ++i) {
    auto fi = features.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j)
        continue;
      auto fj = features.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < d; ++p) {
        const double diff = fi[p] - fj[p];
        s += diff * diff;
      }
      out(i, j) = s;
    }
  }
  return out;
}

Matrix solve_linear(const Matrix &a, const Matrix &b) {
  if (a.rows() != a.cols())
    throw ShapeMismatch("solve_linear: A must be square");
  if (b.rows() != a.rows())
    throw ShapeMismatch("solve_linear: B row count must equal A's order");
  const std::size_t n = a.rows(), m = b.cols();
  Matrix lu = a;
  Matrix x = b;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k)))
        piv = i;
    if (std::abs(lu(piv, k)) < kPivotTolerance)
      throw SingularMatrix("pivot " + std::to_string(k) + " below tolerance");
    if (piv != k) {
      std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(piv).begin());
      std::swap_ranges(x.row(k).begin(), x.row(k).end(), x.row(piv).begin());
    }
    const double pivot = lu(k, k);
#pragma omp parallel for schedule(static) if ((n - k) * (n + m) > kParallelWork)
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / pivot;
      if (f == 0.0)
        continue;
      lu(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j)
        lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < m; ++j)
        x(i, j) -= f * x(k, j);
    }
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = x(ii, j);
      for (std::size_t p = ii + 1; p < n; ++p)
        s -= lu(ii, p) * x(p, j);
      x(ii, j) = s / lu(ii, ii);
    }
  }
  return x;
}

Vector dirichlet_sample(double gamma, std::size_t classes, RandomSource &rng) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw InvalidParameter("dirichlet concentration must be positive and finite");
  if (classes < 2)
    throw InvalidParameter("dirichlet needs at least two classes");
  Vector logs(classes);
  for (auto &l : logs)
    l = rng.log_gamma_variate(gamma);
  const double mx = *std::max_element(logs.begin(), logs.end());
  Vector p(classes);
  double s = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    p[c] = std::exp(logs[c] - mx);
    s += p[c];
  }
  for (auto &v : p)
    v /= s;
  return p;
}

} // namespace grotta
