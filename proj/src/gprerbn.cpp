#include "grotta/gprerbn.hpp"

#include "grotta/errors.hpp"

#include <cmath>
#include <string>

namespace grotta {

GpreRBNState GpreRBNState::fresh(std::size_t channels) {
  GpreRBNState s;
  s.gamma.assign(channels, 1.0);
  s.beta.assign(channels, 0.0);
  s.mu_g.assign(channels, 0.0);
  s.sigma2_g.assign(channels, 1.0);
  return s;
}

BatchStats batch_stats(const Matrix &f) {
  const std::size_t n = f.rows(), c = f.cols();
  BatchStats st{Vector(c, 0.0), Vector(c, 0.0)};
  if (n == 0)
    return st;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j)
      st.mu[j] += f(i, j);
  for (auto &m : st.mu)
    m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = f(i, j) - st.mu[j];
      st.sigma2[j] += d * d;
    }
  for (auto &v : st.sigma2)
    v /= static_cast<double>(n);
  return st;
}

namespace {

void check_channels(const GpreRBNState &state, const Matrix &f) {
  if (f.cols() != state.channels())
    throw ShapeMismatch("normalization input has " + std::to_string(f.cols()) +
                        " channels, layer has " +
                        std::to_string(state.channels()));
  if (f.rows() == 0)
    throw EmptyBatch("normalization input has no rows");
}

NormOutput normalize_with_globals(const GpreRBNState &state, const Matrix &f,
                                  const BatchStats &st) {
  const std::size_t n = f.rows(), c = f.cols();
  NormOutput res;
  NormCache &cache = res.cache;
  cache.stats = st;
  cache.xhat = Matrix(n, c);
  cache.inv_std.resize(c);
  Vector batch_std(c);
  for (std::size_t j = 0; j < c; ++j) {
    batch_std[j] = std::sqrt(st.sigma2[j] + state.eps);
    cache.inv_std[j] = 1.0 / batch_std[j];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j)
      cache.xhat(i, j) = (f(i, j) - st.mu[j]) * cache.inv_std[j];

  // F_gpre = xhat * sg(sqrt(sigma2 + eps)) + sg(mu); only xhat carries
  // gradient.
  cache.normalized = Matrix(n, c);
  cache.dout_dxhat.resize(c);
  res.out = Matrix(n, c);
  for (std::size_t j = 0; j < c; ++j) {
    const double global_inv_std = 1.0 / std::sqrt(state.sigma2_g[j] + state.eps);
    cache.dout_dxhat[j] = state.gamma[j] * batch_std[j] * global_inv_std;
    for (std::size_t i = 0; i < n; ++i) {
      const double f_gpre = cache.xhat(i, j) * batch_std[j] + st.mu[j];
      const double z = (f_gpre - state.mu_g[j]) * global_inv_std;
      cache.normalized(i, j) = z;
      res.out(i, j) = state.gamma[j] * z + state.beta[j];
    }
  }
  return res;
}

NormOutput normalize_with_batch(const GpreRBNState &state, const Matrix &f,
                                const BatchStats &st) {
  const std::size_t n = f.rows(), c = f.cols();
  NormOutput res;
  NormCache &cache = res.cache;
  cache.stats = st;
  cache.inv_std.resize(c);
  for (std::size_t j = 0; j < c; ++j)
    cache.inv_std[j] = 1.0 / std::sqrt(st.sigma2[j] + state.eps);
  cache.xhat = Matrix(n, c);
  res.out = Matrix(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double z = (f(i, j) - st.mu[j]) * cache.inv_std[j];
      cache.xhat(i, j) = z;
      res.out(i, j) = state.gamma[j] * z + state.beta[j];
    }
  cache.normalized = cache.xhat;
  cache.dout_dxhat = state.gamma;
  return res;
}

} // namespace

NormOutput gpre_forward(GpreRBNState &state, const Matrix &f, Tracking tracking) {
  check_channels(state, f);
  if (tracking == Tracking::Enable && f.rows() < 2)
    throw DegenerateBatch("tracking needs at least two rows, got " +
                          std::to_string(f.rows()));
  const BatchStats st = batch_stats(f);
  if (tracking == Tracking::Enable) {
    const double a = state.alpha;
    for (std::size_t j = 0; j < f.cols(); ++j) {
      state.mu_g[j] = (1.0 - a) * state.mu_g[j] + a * st.mu[j];
      state.sigma2_g[j] = (1.0 - a) * state.sigma2_g[j] + a * st.sigma2[j];
    }
  }
  return normalize_with_globals(state, f, st);
}

NormOutput gpre_forward(const GpreRBNState &state, const Matrix &f) {
  check_channels(state, f);
  return normalize_with_globals(state, f, batch_stats(f));
}

NormOutput batch_norm_forward(GpreRBNState &state, const Matrix &f,
                              double running_momentum) {
  check_channels(state, f);
  const std::size_t c = f.cols();
  const BatchStats st = batch_stats(f);
  if (running_momentum > 0.0) {
    if (f.rows() < 2)
      throw DegenerateBatch("running statistics need at least two rows");
    if (!state.has_source_stats()) {
      state.mu_s.assign(c, 0.0);
      state.sigma2_s.assign(c, 1.0);
    }
    const double m = running_momentum;
    for (std::size_t j = 0; j < c; ++j) {
      state.mu_s[j] = (1.0 - m) * state.mu_s[j] + m * st.mu[j];
      state.sigma2_s[j] = (1.0 - m) * state.sigma2_s[j] + m * st.sigma2[j];
    }
  }
  return normalize_with_batch(state, f, st);
}

NormOutput batch_norm_forward(const GpreRBNState &state, const Matrix &f) {
  check_channels(state, f);
  return normalize_with_batch(state, f, batch_stats(f));
}

NormGrads norm_backward(NormCache &cache, const Matrix &grad_out) {
  if (cache.consumed)
    throw StaleCache("normalization cache already used by a backward pass");
  if (grad_out.rows() != cache.xhat.rows() || grad_out.cols() != cache.xhat.cols())
    throw ShapeMismatch("normalization grad_out shape differs from forward");
  cache.consumed = true;
  const std::size_t n = grad_out.rows(), c = grad_out.cols();
  NormGrads g{Vector(c, 0.0), Vector(c, 0.0), Matrix(n, c)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < c; ++j) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double go = grad_out(i, j);
      g.beta[j] += go;
      g.gamma[j] += go * cache.normalized(i, j);
      const double gx = go * cache.dout_dxhat[j];
      sum_g += gx;
      sum_gx += gx * cache.xhat(i, j);
    }
    const double mean_g = sum_g * inv_n, mean_gx = sum_gx * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
      const double gx = grad_out(i, j) * cache.dout_dxhat[j];
      g.input(i, j) =
          cache.inv_std[j] * (gx - mean_g - cache.xhat(i, j) * mean_gx);
    }
  }
  return g;
}

void init_global_from_source(GpreRBNState &state) {
  if (!state.has_source_stats())
    throw UninitializedSource("source running statistics were never populated");
  state.mu_g = state.mu_s;
  state.sigma2_g = state.sigma2_s;
}

} // namespace grotta
