#pragma once

#include "grotta/gprerbn.hpp"
#include "grotta/matrix.hpp"
#include "grotta/model.hpp"
#include "grotta/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace grotta::testing {

inline Matrix random_matrix(RandomSource &rng, std::size_t r, std::size_t c,
                            double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double &v : m.data())
    v = rng.uniform(lo, hi);
  return m;
}

inline Matrix random_simplex_rows(RandomSource &rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      s += m(i, j) = rng.uniform() + 1e-3;
    for (std::size_t j = 0; j < c; ++j)
      m(i, j) /= s;
  }
  return m;
}

// Initialized model with non-trivial affine parameters and statistics.
inline Model random_model(RandomSource &rng, std::size_t d, std::vector<std::size_t> hidden,
                          std::size_t classes) {
  Model m = Model::initialize({d, std::move(hidden), classes}, rng);
  for (auto &b : m.blocks()) {
    auto &n = b.norm;
    for (double &g : n.gamma)
      g = rng.uniform(0.5, 1.5);
    for (double &v : n.beta)
      v = rng.uniform(-0.5, 0.5);
    n.mu_s.assign(n.channels(), 0.0);
    n.sigma2_s.assign(n.channels(), 1.0);
    for (std::size_t c = 0; c < n.channels(); ++c) {
      n.mu_s[c] = rng.uniform(-0.3, 0.3);
      n.sigma2_s[c] = rng.uniform(0.5, 2.0);
    }
    n.mu_g = n.mu_s;
    n.sigma2_g = n.sigma2_s;
  }
  for (double &v : m.head().bias)
    v = rng.uniform(-0.2, 0.2);
  return m;
}

struct SiteStats {
  Vector mu;
  Vector sigma2;
};

enum class RefNorm { Batch, Global };

// What a reference forward saw at each site.
struct RefTrace {
  std::vector<SiteStats> batch;   // batch statistics of the pre-norm input
  std::vector<SiteStats> globals; // globals used to normalize
  Matrix features;
};

// Straight-line re-implementation of the MLP forward, used as an oracle.
// Global mode: batch statistics are recomputed from the input every call;
// `frozen` replaces the stop-gradient copies, `globals` replaces the
// model's globals. With `track` and no `globals`, the EMA is applied
// before normalizing.
inline Matrix ref_forward(const Model &m, const Matrix &x, RefNorm norm, bool track = false,
                          const std::vector<SiteStats> *frozen = nullptr,
                          const std::vector<SiteStats> *globals = nullptr,
                          RefTrace *trace = nullptr) {
  Matrix h = x;
  const std::size_t n = x.rows();
  for (std::size_t b = 0; b < m.blocks().size(); ++b) {
    const Block &blk = m.blocks()[b];
    const std::size_t out = blk.linear.weight.cols();
    Matrix f(n, out);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out; ++j) {
        double s = blk.linear.bias[j];
        for (std::size_t k = 0; k < h.cols(); ++k)
          s += h(i, k) * blk.linear.weight(k, j);
        f(i, j) = s;
      }
    SiteStats st{Vector(out, 0.0), Vector(out, 0.0)};
    for (std::size_t j = 0; j < out; ++j) {
      for (std::size_t i = 0; i < n; ++i)
        st.mu[j] += f(i, j);
      st.mu[j] /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        st.sigma2[j] += (f(i, j) - st.mu[j]) * (f(i, j) - st.mu[j]);
      st.sigma2[j] /= static_cast<double>(n);
    }
    const GpreRBNState &ns = blk.norm;
    const SiteStats sg = frozen ? (*frozen)[b] : st;
    SiteStats g{ns.mu_g, ns.sigma2_g};
    if (globals) {
      g = (*globals)[b];
    } else if (track) {
      for (std::size_t j = 0; j < out; ++j) {
        g.mu[j] = (1.0 - ns.alpha) * g.mu[j] + ns.alpha * sg.mu[j];
        g.sigma2[j] = (1.0 - ns.alpha) * g.sigma2[j] + ns.alpha * sg.sigma2[j];
      }
    }
    if (trace) {
      trace->batch.push_back(st);
      trace->globals.push_back(g);
    }
    Matrix a(n, out);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out; ++j) {
        const double xhat = (f(i, j) - st.mu[j]) / std::sqrt(st.sigma2[j] + ns.eps);
        double z;
        if (norm == RefNorm::Batch) {
          z = xhat;
        } else {
          const double fg = xhat * std::sqrt(sg.sigma2[j] + ns.eps) + sg.mu[j];
          z = (fg - g.mu[j]) / std::sqrt(g.sigma2[j] + ns.eps);
        }
        a(i, j) = std::max(0.0, ns.gamma[j] * z + ns.beta[j]);
      }
    h = std::move(a);
  }
  if (trace)
    trace->features = h;
  const Linear &hd = m.head();
  Matrix logits(n, hd.weight.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < hd.weight.cols(); ++j) {
      double s = hd.bias[j];
      for (std::size_t k = 0; k < h.cols(); ++k)
        s += h(i, k) * hd.weight(k, j);
      logits(i, j) = s;
    }
  return logits;
}

inline std::vector<double> ref_log_softmax(std::span<const double> z) {
  double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z)
    s += std::exp(v - mx);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    out[i] = z[i] - mx - std::log(s);
  return out;
}

// -(w / C) sum t log max(p, 1e-12) over rows.
inline double ref_soft_ce(const Matrix &targets, const Matrix &logits, double w) {
  double total = 0.0;
  const double floor = std::log(1e-12);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto lp = ref_log_softmax(logits.row(i));
    for (std::size_t c = 0; c < logits.cols(); ++c)
      total -= w / static_cast<double>(logits.cols()) * targets(i, c) * std::max(lp[c], floor);
  }
  return total;
}

// Central differences of `loss` over every parameter in `scope`.
inline std::vector<Vector> finite_difference(const Model &model, Scope scope,
                                             const std::function<double(const Model &)> &loss,
                                             double h = 1e-5) {
  Model m = model;
  auto params = m.parameters(scope);
  std::vector<Vector> out;
  for (auto &p : params) {
    Vector g(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double keep = p[k];
      p[k] = keep + h;
      const double up = loss(m);
      p[k] = keep - h;
      const double down = loss(m);
      p[k] = keep;
      g[k] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

inline double max_rel_error(const std::vector<Vector> &a, const std::vector<Vector> &b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].size(); ++k)
      worst = std::max(worst, rel_error(a[i][k], b[i][k]));
  return worst;
}

} // namespace grotta::testing
