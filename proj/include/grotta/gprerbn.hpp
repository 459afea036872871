#pragma once

// Gradient-preserving robust batch normalization.
//
// Each site keeps a set of global statistics (mu_g, sigma2_g) that are
// refreshed by an exponential moving average, but only on forwards that
// ask for tracking. Normalization always uses the global statistics.
// The input is first rewritten as
//
//   F_gpre = (F - mu + sg(mu)) / sqrt(sigma2 + eps) * sqrt(sg(sigma2) + eps)
//
// where (mu, sigma2) are the batch statistics and sg() freezes a value for
// differentiation. F_gpre equals F numerically, but its Jacobian is that of
// training-time batch normalization, so the backward pass keeps the
// batch-coupled form the network was trained with.

#include "grotta/matrix.hpp"

#include <cstddef>

namespace grotta {

inline constexpr double kDefaultBnEps = 1e-5;
inline constexpr double kDefaultGlobalAlpha = 0.05;

struct GpreRBNState {
  Vector gamma;    // learnable scale
  Vector beta;     // learnable shift
  Vector mu_g;     // global mean
  Vector sigma2_g; // global variance
  Vector mu_s;     // source running mean, empty until populated
  Vector sigma2_s; // source running variance, empty until populated
  double alpha = kDefaultGlobalAlpha;
  double eps = kDefaultBnEps;

  // gamma = 1, beta = 0, globals = (0, 1), no source statistics.
  static GpreRBNState fresh(std::size_t channels);

  std::size_t channels() const noexcept { return gamma.size(); }
  bool has_source_stats() const noexcept {
    return !mu_s.empty() && mu_s.size() == channels();
  }
  bool operator==(const GpreRBNState &) const = default;
};

struct BatchStats {
  Vector mu;
  Vector sigma2; // biased, divisor = row count
};

BatchStats batch_stats(const Matrix &f);

enum class Tracking { Enable, Disable };

// Everything the backward pass needs from a forward.
struct NormCache {
  BatchStats stats;  // batch statistics of the input (the sg() values)
  Matrix xhat;       // (F - mu) / sqrt(sigma2 + eps), batch statistics
  Matrix normalized; // pre-affine output fed to gamma
  Vector inv_std;    // 1 / sqrt(sigma2 + eps)
  Vector dout_dxhat; // d output / d xhat per channel
  bool consumed = false;
};

struct NormOutput {
  Matrix out;
  NormCache cache;
};

struct NormGrads {
  Vector gamma;
  Vector beta;
  Matrix input;
};

// Gradient-preserving forward. When tracking is enabled the globals are
// updated with the (detached) batch statistics before normalizing, and the
// batch must have at least two rows.
NormOutput gpre_forward(GpreRBNState &state, const Matrix &f, Tracking tracking);
// Tracking disabled; the state is only read.
NormOutput gpre_forward(const GpreRBNState &state, const Matrix &f);

// Ordinary training-time batch normalization with the batch's own
// statistics. If `running_momentum` is positive the source running
// statistics are updated as running = (1 - m) * running + m * batch.
NormOutput batch_norm_forward(GpreRBNState &state, const Matrix &f,
                              double running_momentum);
NormOutput batch_norm_forward(const GpreRBNState &state, const Matrix &f);

// Shared by both forwards. Marks the cache consumed; a second call throws
// StaleCache.
NormGrads norm_backward(NormCache &cache, const Matrix &grad_out);

inline NormGrads gpre_backward(NormCache &cache, const Matrix &grad_out) {
  return norm_backward(cache, grad_out);
}

// mu_g <- mu_s, sigma2_g <- sigma2_s. Throws UninitializedSource if the
// source statistics were never populated.
void init_global_from_source(GpreRBNState &state);

} // namespace grotta
