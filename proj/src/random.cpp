#include "grotta/random.hpp"

#include "grotta/errors.hpp"

#include <cmath>

namespace grotta {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double RandomSource::uniform() {
  return std::generate_canonical<double, 53>(engine_);
}

double RandomSource::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RandomSource::normal() { return normal_(engine_); }

double RandomSource::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

std::size_t RandomSource::index(std::size_t n) {
  if (n == 0)
    throw InvalidParameter("index range must be non-empty");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

double RandomSource::log_gamma_variate(double shape) {
  if (!(shape > 0.0))
    throw InvalidParameter("gamma shape must be positive");
  if (shape < 1.0) {
    // G(a) = G(a + 1) * U^(1/a)
    const double boost = std::log1p(-uniform()) / shape;
    return log_gamma_variate(shape + 1.0) + boost;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0)
      continue;
    v = v * v * v;
    const double u = 1.0 - uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
      return std::log(d) + std::log(v);
  }
}

double RandomSource::gamma_variate(double shape) {
  return std::exp(log_gamma_variate(shape));
}

RandomSource RandomSource::derive(std::uint64_t tag) const {
  return RandomSource(mix_seed(seed_, tag));
}

} // namespace grotta
