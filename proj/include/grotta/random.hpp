#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace grotta {

// Seeded pseudo-random source. Same seed and same call sequence give
// bit-identical draws. Single owner; never share across threads.
class RandomSource {
public:
  explicit RandomSource(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev);
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  // Log of a Gamma(shape, 1) draw. Marsaglia-Tsang for shape >= 1, the
  // u^(1/shape) boost below that. Staying in log space keeps tiny shapes
  // from underflowing to an all-zero Dirichlet vector.
  double log_gamma_variate(double shape);
  double gamma_variate(double shape);

  // Independent child stream keyed by tag.
  RandomSource derive(std::uint64_t tag) const;

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

} // namespace grotta
