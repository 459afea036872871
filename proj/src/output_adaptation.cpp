#include "grotta/output_adaptation.hpp"

#include "grotta/errors.hpp"
#include "grotta/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace grotta {

Matrix build_affinity(const Matrix &features, const AffinityConfig &config) {
  const std::size_t n = features.rows();
  if (n < 2)
    throw TooFewSamples("affinity needs at least two samples");
  const Matrix d2 = pairwise_sq_dist(features);
  Matrix s(n, n);

  if (config.kind == AffinityKind::Knn) {
    if (config.k < 1 || config.k > n - 1)
      throw TooFewSamples("k = " + std::to_string(config.k) + " needs at least " +
                          std::to_string(config.k + 1) + " samples, got " +
                          std::to_string(n));
    const double w = 1.0 / static_cast<double>(config.k);
    std::vector<std::size_t> others(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t pos = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i)
          others[pos++] = j;
      std::partial_sort(others.begin(), others.begin() + config.k, others.end(),
                        [&](std::size_t a, std::size_t b) {
                          if (d2(i, a) != d2(i, b))
                            return d2(i, a) < d2(i, b);
                          return a < b;
                        });
      for (std::size_t t = 0; t < config.k; ++t)
        s(i, others[t]) = w;
    }
    return s;
  }

  if (!(config.sigma_rbf > 0.0))
    throw InvalidParameter("rbf bandwidth must be positive");
  const double inv = 1.0 / (2.0 * config.sigma_rbf * config.sigma_rbf);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i)
        continue;
      s(i, j) = std::exp(-d2(i, j) * inv);
      sum += s(i, j);
    }
    if (sum > 0.0) {
      for (std::size_t j = 0; j < n; ++j)
        s(i, j) /= sum;
    } else {
      for (std::size_t j = 0; j < n; ++j)
        s(i, j) = j == i ? 0.0 : 1.0 / static_cast<double>(n - 1);
    }
  }
  return s;
}

Matrix lsie_solve(const Matrix &p, const Matrix &s, double lambda) {
  const std::size_t n = p.rows();
  if (s.rows() != n || s.cols() != n)
    throw ShapeMismatch("affinity must be B x B for a B-row prediction matrix");
  if (!(lambda >= 0.0 && lambda < 1.0))
    throw InvalidParameter("lambda must lie in [0, 1)");
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a(i, j) = (i == j ? 1.0 : 0.0) - lambda * s(i, j);
  Matrix rhs = p;
  for (double &v : rhs.data())
    v *= 1.0 - lambda;
  return solve_linear(a, rhs);
}

Imbalance imbalance_lambda(const Matrix &p) {
  const std::size_t b = p.rows(), c = p.cols();
  if (c < 2)
    throw InvalidParameter("imbalance score needs at least two classes");
  if (b == 0)
    throw EmptyBatch("imbalance score of an empty batch");
  Vector freq(c, 0.0);
  for (std::size_t cls : argmax_rows(p))
    freq[cls] += 1.0 / static_cast<double>(b);
  std::sort(freq.begin(), freq.end(), std::greater<>());
  const std::size_t r = std::min(c, b);
  const double top_sum = std::accumulate(freq.begin(), freq.begin() + r, 0.0);
  double sq = 0.0;
  for (std::size_t k = 0; k < r; ++k) {
    const double d = freq[k] / top_sum - 1.0 / static_cast<double>(r);
    sq += d * d;
  }
  Imbalance out;
  out.zeta = std::sqrt(sq);
  out.lambda = std::pow(out.zeta, 1.0 / std::log(static_cast<double>(c)));
  return out;
}

Matrix one_hot_rows(const Matrix &m) {
  Matrix out(m.rows(), m.cols());
  const auto idx = argmax_rows(m);
  for (std::size_t i = 0; i < m.rows(); ++i)
    out(i, idx[i]) = 1.0;
  return out;
}

RefinementResult refine(const Matrix &p, const Matrix &features,
                        const RefineOptions &options) {
  if (features.rows() != p.rows())
    throw ShapeMismatch("refine: one feature row per prediction row required");
  RefinementResult r;
  r.p = p;
  const Imbalance imb = imbalance_lambda(p);
  r.zeta = imb.zeta;
  r.lambda = options.fixed_lambda.value_or(imb.lambda);

  if (r.lambda == 0.0 || p.rows() < 2) {
    r.z_star = p;
    r.z_final = p;
  } else {
    AffinityConfig aff = options.affinity;
    aff.k = std::min(aff.k, p.rows() - 1);
    const Matrix s = build_affinity(features, aff);
    r.z_star = lsie_solve(p, s, r.lambda);
    const Matrix z = one_hot_rows(r.z_star);
    if (options.fixed_lambda) {
      r.z_final = z;
    } else {
      r.z_final = Matrix(p.rows(), p.cols());
      for (std::size_t k = 0; k < p.size(); ++k)
        r.z_final.data()[k] = r.zeta * z.data()[k] + (1.0 - r.zeta) * p.data()[k];
    }
  }
  r.classes = argmax_rows(r.z_final);
  return r;
}

} // namespace grotta
