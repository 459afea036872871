#pragma once

// Synthetic test streams with continual covariate shift (the input
// transform changes per segment) and continual label shift (each segment
// is cut into periods whose label distribution is a fresh symmetric
// Dirichlet draw).

#include "grotta/matrix.hpp"
#include "grotta/random.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace grotta {

struct BaseDataset {
  Matrix features;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  // Original label value of each dense class index (identity for
  // synthetic data).
  std::vector<long long> class_values;

  // Throws InvalidParameter / EmptyClassPool when the invariants fail.
  void validate() const;
  std::vector<std::vector<std::size_t>> class_pools() const;
  BaseDataset subset(std::span<const std::size_t> rows) const;
};

struct IdentityTransform {};
struct GaussianNoiseTransform {
  double scale = 0.0;
};
struct AffineTransform {
  Matrix rotation; // d x d, applied as R x
  Vector shift;
};
struct FeatureScaleTransform {
  Vector factors;
};

using CovariateTransform = std::variant<IdentityTransform, GaussianNoiseTransform,
                                        AffineTransform, FeatureScaleTransform>;

// Noise transforms draw from `noise`; the others ignore it.
Vector apply_transform(const CovariateTransform &t, std::span<const double> x,
                       RandomSource &noise);
std::string transform_name(const CovariateTransform &t);

// A graded sequence of `count` transforms cycling through noise, affine
// (random Givens rotations plus a shift) and per-feature scaling.
std::vector<CovariateTransform> default_segments(std::size_t dim, std::size_t count,
                                                 std::uint64_t seed,
                                                 double severity = 1.0);

struct StreamConfig {
  std::vector<CovariateTransform> segments;
  std::size_t periods_per_segment = 10;
  std::size_t batches_per_period = 10;
  std::size_t batch_size = 64;
  double gamma = 1e-3; // Dirichlet concentration
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t total_batches() const {
    return segments.size() * periods_per_segment * batches_per_period;
  }
};

struct StreamBatch {
  Matrix features;
  // Evaluation only; adaptation entry points take the feature matrix.
  std::vector<std::size_t> true_labels;
  std::vector<std::size_t> sample_indices; // rows of the base dataset
  std::size_t segment = 0;
  std::size_t period = 0; // global period index
  std::size_t step = 0;
};

struct Stream {
  StreamConfig config;
  std::size_t num_classes = 0;
  std::size_t input_dim = 0;
  std::vector<StreamBatch> batches;
  std::vector<Vector> period_distributions; // one Dirichlet draw per period
};

// Labels come from `seed`-derived label randomness, transform noise from an
// independent derived source, so a recorded index list replays exactly.
Stream generate_stream(const BaseDataset &base, const StreamConfig &config);

// Rebuilds batch features and labels from recorded indices.
Stream replay_stream(const BaseDataset &base, const StreamConfig &config,
                     std::size_t num_classes, std::vector<Vector> period_distributions,
                     const std::vector<std::vector<std::size_t>> &batch_indices);

// Mean Euclidean distance of each distribution to uniform.
double id_metric(const std::vector<Vector> &dists);
// (sqrt(2) / 2n) * sum of consecutive Euclidean distances; in [0, 1].
double cd_metric(const std::vector<Vector> &dists);

// Class c ~ N(mu_c, I) with class means in random directions, rescaled so
// the closest pair is exactly `separation` apart.
BaseDataset synth_gaussians(std::size_t classes, std::size_t dim,
                            std::size_t per_class, double separation,
                            std::uint64_t seed);

// CSV rows: feature columns then one integer label. Labels are re-indexed
// densely in increasing order of their values.
BaseDataset ingest_csv(const std::filesystem::path &path, bool has_header);

// Stream manifest: config, per-period distributions and per-batch indices.
void save_manifest(const Stream &stream, const std::filesystem::path &path);
void save_manifest(const Stream &stream, std::ostream &out);

struct StreamManifest {
  StreamConfig config;
  std::size_t num_classes = 0;
  std::size_t input_dim = 0;
  std::vector<Vector> period_distributions;
  std::vector<std::vector<std::size_t>> batch_indices;
};

StreamManifest load_manifest(const std::filesystem::path &path);
StreamManifest load_manifest_from(std::istream &in);
Stream replay_manifest(const BaseDataset &base, const StreamManifest &manifest);

} // namespace grotta
