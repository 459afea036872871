#include "grotta/streamgen.hpp"

#include "grotta/errors.hpp"
#include "grotta/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace grotta {

namespace {
constexpr std::uint64_t kLabelStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
} // namespace

void BaseDataset::validate() const {
  if (features.rows() == 0)
    throw EmptyDataset("dataset has no rows");
  if (labels.size() != features.rows())
    throw InvalidParameter("dataset needs one label per row");
  if (num_classes < 2)
    throw InvalidParameter("dataset needs at least two classes");
  std::vector<std::size_t> count(num_classes, 0);
  for (std::size_t y : labels) {
    if (y >= num_classes)
      throw InvalidClass("dataset label out of range");
    ++count[y];
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if (count[c] == 0)
      throw EmptyClassPool("class " + std::to_string(c) + " has no samples");
}

std::vector<std::vector<std::size_t>> BaseDataset::class_pools() const {
  std::vector<std::vector<std::size_t>> pools(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i)
    pools.at(labels[i]).push_back(i);
  return pools;
}

BaseDataset BaseDataset::subset(std::span<const std::size_t> rows) const {
  BaseDataset out;
  out.features = features.gather_rows(rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows)
    out.labels.push_back(labels.at(r));
  out.num_classes = num_classes;
  out.class_values = class_values;
  return out;
}

Vector apply_transform(const CovariateTransform &t, std::span<const double> x,
                       RandomSource &noise) {
  Vector out(x.begin(), x.end());
  if (const auto *n = std::get_if<GaussianNoiseTransform>(&t)) {
    for (double &v : out)
      v += n->scale * noise.normal();
  } else if (const auto *a = std::get_if<AffineTransform>(&t)) {
    if (a->rotation.rows() != x.size() || a->shift.size() != x.size())
      throw ShapeMismatch("affine transform dimension differs from features");
    for (std::size_t i = 0; i < x.size(); ++i) {
      double s = a->shift[i];
      for (std::size_t j = 0; j < x.size(); ++j)
        s += a->rotation(i, j) * x[j];
      out[i] = s;
    }
  } else if (const auto *f = std::get_if<FeatureScaleTransform>(&t)) {
    if (f->factors.size() != x.size())
      throw ShapeMismatch("scale transform dimension differs from features");
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] *= f->factors[i];
  }
  return out;
}

std::string transform_name(const CovariateTransform &t) {
  return std::visit(
      [](const auto &v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, IdentityTransform>)
          return "identity";
        else if constexpr (std::is_same_v<T, GaussianNoiseTransform>)
          return "gaussian_noise";
        else if constexpr (std::is_same_v<T, AffineTransform>)
          return "affine";
        else
          return "feature_scale";
      },
      t);
}

std::vector<CovariateTransform> default_segments(std::size_t dim, std::size_t count,
                                                 std::uint64_t seed, double severity) {
  if (dim < 2)
    throw InvalidParameter("default segments need at least two dimensions");
  RandomSource rng(mix_seed(seed, 0x5e6));
  std::vector<CovariateTransform> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    // severity ramps up within each round of the three kinds
    const double grade = severity * (0.75 + 0.25 * static_cast<double>((i / 3) % 3));
    switch (i % 3) {
    case 0:
      out.emplace_back(GaussianNoiseTransform{0.5 * grade});
      break;
    case 1: {
      AffineTransform a{Matrix::identity(dim), Vector(dim, 0.0)};
      const double angle = 0.35 * grade;
      for (std::size_t r = 0; r < dim; ++r) {
        const std::size_t p = rng.index(dim);
        std::size_t q = rng.index(dim - 1);
        if (q >= p)
          ++q;
        const double th = rng.uniform() < 0.5 ? -angle : angle;
        const double c = std::cos(th), s = std::sin(th);
        // left-multiply by the Givens rotation on (p, q)
        for (std::size_t j = 0; j < dim; ++j) {
          const double rp = a.rotation(p, j), rq = a.rotation(q, j);
          a.rotation(p, j) = c * rp - s * rq;
          a.rotation(q, j) = s * rp + c * rq;
        }
      }
      double norm = 0.0;
      for (double &v : a.shift) {
        v = rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (double &v : a.shift)
        v *= 2.5 * grade / norm;
      out.emplace_back(std::move(a));
      break;
    }
    default: {
      FeatureScaleTransform f{Vector(dim)};
      for (double &v : f.factors)
        v = std::exp(rng.uniform(-0.7, 0.7) * grade);
      out.emplace_back(std::move(f));
      break;
    }
    }
  }
  return out;
}

void StreamConfig::validate() const {
  if (segments.empty())
    throw InvalidParameter("stream needs at least one segment");
  if (periods_per_segment < 1 || batches_per_period < 1 || batch_size < 1)
    throw InvalidParameter("stream counts must be at least 1");
  if (!(gamma > 0.0))
    throw InvalidParameter("Dirichlet gamma must be positive");
}

namespace {

std::size_t draw_class(const Vector &q, RandomSource &rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t c = 0; c < q.size(); ++c) {
    if (q[c] <= 0.0)
      continue;
    last_positive = c;
    acc += q[c];
    if (u < acc)
      return c;
  }
  return last_positive;
}

StreamBatch build_batch(const BaseDataset &base, const CovariateTransform &t,
                        std::vector<std::size_t> indices, RandomSource &noise) {
  StreamBatch b;
  b.features = Matrix(indices.size(), base.features.cols());
  b.true_labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Vector x = apply_transform(t, base.features.row(indices[k]), noise);
    std::copy(x.begin(), x.end(), b.features.row(k).begin());
    b.true_labels.push_back(base.labels.at(indices[k]));
  }
  b.sample_indices = std::move(indices);
  return b;
}

} // namespace

Stream generate_stream(const BaseDataset &base, const StreamConfig &config) {
  config.validate();
  base.validate();
  const auto pools = base.class_pools();
  RandomSource label_rng(mix_seed(config.seed, kLabelStream));
  RandomSource noise_rng(mix_seed(config.seed, kNoiseStream));

  Stream s;
  s.config = config;
  s.num_classes = base.num_classes;
  s.input_dim = base.features.cols();
  s.batches.reserve(config.total_batches());
  std::size_t step = 0, period = 0;
  for (std::size_t seg = 0; seg < config.segments.size(); ++seg) {
    for (std::size_t p = 0; p < config.periods_per_segment; ++p, ++period) {
      Vector q = dirichlet_sample(config.gamma, base.num_classes, label_rng);
      for (std::size_t b = 0; b < config.batches_per_period; ++b, ++step) {
        std::vector<std::size_t> idx(config.batch_size);
        for (auto &i : idx) {
          const std::size_t y = draw_class(q, label_rng);
          const auto &pool = pools[y];
          if (pool.empty())
            throw EmptyClassPool("class " + std::to_string(y) + " has no samples");
          i = pool[label_rng.index(pool.size())];
        }
        StreamBatch batch =
            build_batch(base, config.segments[seg], std::move(idx), noise_rng);
        batch.segment = seg;
        batch.period = period;
        batch.step = step;
        s.batches.push_back(std::move(batch));
      }
      s.period_distributions.push_back(std::move(q));
    }
  }
  return s;
}

Stream replay_stream(const BaseDataset &base, const StreamConfig &config,
                     std::size_t num_classes, std::vector<Vector> period_distributions,
                     const std::vector<std::vector<std::size_t>> &batch_indices) {
  config.validate();
  if (batch_indices.size() != config.total_batches())
    throw InvalidParameter("manifest batch count does not match its config");
  RandomSource noise_rng(mix_seed(config.seed, kNoiseStream));
  Stream s;
  s.config = config;
  s.num_classes = num_classes;
  s.input_dim = base.features.cols();
  s.period_distributions = std::move(period_distributions);
  const std::size_t per_segment = config.periods_per_segment * config.batches_per_period;
  for (std::size_t step = 0; step < batch_indices.size(); ++step) {
    const std::size_t seg = step / per_segment;
    for (std::size_t i : batch_indices[step])
      if (i >= base.features.rows())
        throw InvalidParameter("manifest index outside the base dataset");
    StreamBatch batch = build_batch(base, config.segments[seg], batch_indices[step], noise_rng);
    batch.segment = seg;
    batch.period = step / config.batches_per_period;
    batch.step = step;
    s.batches.push_back(std::move(batch));
  }
  return s;
}

namespace {

void check_simplex(const Vector &p) {
  if (p.empty())
    throw InvalidDistribution("empty distribution");
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InvalidDistribution("negative or non-finite probability");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw InvalidDistribution("probabilities sum to " + std::to_string(s));
}

} // namespace

double id_metric(const std::vector<Vector> &dists) {
  if (dists.empty())
    throw InvalidDistribution("ID needs at least one distribution");
  double total = 0.0;
  for (const auto &p : dists) {
    check_simplex(p);
    if (p.size() != dists.front().size())
      throw InvalidDistribution("distributions differ in class count");
    const double u = 1.0 / static_cast<double>(p.size());
    double sq = 0.0;
    for (double v : p)
      sq += (v - u) * (v - u);
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(dists.size());
}

double cd_metric(const std::vector<Vector> &dists) {
  if (dists.size() < 2)
    throw TooFewDistributions("CD needs at least two distributions");
  for (const auto &p : dists) {
    check_simplex(p);
    if (p.size() != dists.front().size())
      throw InvalidDistribution("distributions differ in class count");
  }
  double total = 0.0;
  for (std::size_t i = 1; i < dists.size(); ++i) {
    double sq = 0.0;
    for (std::size_t c = 0; c < dists[i].size(); ++c) {
      const double d = dists[i][c] - dists[i - 1][c];
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  const double n = static_cast<double>(dists.size() - 1);
  return std::sqrt(2.0) / (2.0 * n) * total;
}

BaseDataset synth_gaussians(std::size_t classes, std::size_t dim,
                            std::size_t per_class, double separation,
                            std::uint64_t seed) {
  if (classes < 2)
    throw InvalidParameter("synth_gaussians needs at least two classes");
  if (dim < 2)
    throw InvalidParameter("synth_gaussians needs at least two dimensions");
  if (per_class < 1)
    throw InvalidParameter("synth_gaussians needs at least one sample per class");
  if (!(separation >= 0.0))
    throw InvalidParameter("separation must be non-negative");
  RandomSource rng(seed);
  Matrix means(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    double norm = 0.0;
    for (double &v : means.row(c)) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double &v : means.row(c))
      v /= norm;
  }
  const Matrix d2 = pairwise_sq_dist(means);
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < classes; ++i)
    for (std::size_t j = i + 1; j < classes; ++j)
      closest = std::min(closest, std::sqrt(d2(i, j)));
  const double scale = closest > 0.0 ? separation / closest : 0.0;
  for (double &v : means.data())
    v *= scale;

  BaseDataset ds;
  ds.num_classes = classes;
  ds.features = Matrix(classes * per_class, dim);
  ds.labels.resize(classes * per_class);
  ds.class_values.resize(classes);
  std::iota(ds.class_values.begin(), ds.class_values.end(), 0LL);
  for (std::size_t k = 0; k < per_class; ++k)
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t row = k * classes + c;
      ds.labels[row] = c;
      for (std::size_t j = 0; j < dim; ++j)
        ds.features(row, j) = means(c, j) + rng.normal();
    }
  return ds;
}

} // namespace grotta
