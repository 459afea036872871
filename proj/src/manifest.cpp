// Stream manifest text format, one record per line:
//
//   grotta-stream 1
//   seed <u64>
//   gamma <double>
//   num_classes <C>
//   input_dim <d>
//   batch_size <B>
//   periods_per_segment <P>
//   batches_per_period <K>
//   segments <S>
//   segment identity
//   segment gaussian_noise <scale>
//   segment affine <d*d rotation, row-major> <d shift>
//   segment feature_scale <d factors>
//   period <C probabilities>                 (S*P lines)
//   batch <B base-dataset row indices>       (S*P*K lines)
//   end

#include "grotta/errors.hpp"
#include "grotta/streamgen.hpp"
#include "text_format.hpp"

#include <fstream>
#include <string>

namespace grotta {

namespace {

void write_values(std::ostream &out, std::span<const double> v) {
  for (double x : v)
    out << ' ' << text::format_double(x);
}

} // namespace

void save_manifest(const Stream &stream, std::ostream &out) {
  const StreamConfig &c = stream.config;
  out << "grotta-stream 1\n";
  out << "seed " << c.seed << '\n';
  out << "gamma " << text::format_double(c.gamma) << '\n';
  out << "num_classes " << stream.num_classes << '\n';
  out << "input_dim " << stream.input_dim << '\n';
  out << "batch_size " << c.batch_size << '\n';
  out << "periods_per_segment " << c.periods_per_segment << '\n';
  out << "batches_per_period " << c.batches_per_period << '\n';
  out << "segments " << c.segments.size() << '\n';
  for (const auto &t : c.segments) {
    out << "segment " << transform_name(t);
    if (const auto *n = std::get_if<GaussianNoiseTransform>(&t)) {
      out << ' ' << text::format_double(n->scale);
    } else if (const auto *a = std::get_if<AffineTransform>(&t)) {
      write_values(out, a->rotation.data());
      write_values(out, a->shift);
    } else if (const auto *f = std::get_if<FeatureScaleTransform>(&t)) {
      write_values(out, f->factors);
    }
    out << '\n';
  }
  for (const auto &p : stream.period_distributions) {
    out << "period";
    write_values(out, p);
    out << '\n';
  }
  for (const auto &b : stream.batches) {
    out << "batch";
    for (std::size_t i : b.sample_indices)
      out << ' ' << i;
    out << '\n';
  }
  out << "end\n";
  if (!out)
    throw IoError("failed writing stream manifest");
}

void save_manifest(const Stream &stream, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot open " + path.string() + " for writing");
  save_manifest(stream, out);
}

namespace {

class LineReader {
public:
  explicit LineReader(std::istream &in) : in_(in) {}

  // Tokens after the expected key.
  std::vector<std::string_view> next(const std::string &key) {
    if (!std::getline(in_, line_))
      throw ParseError("manifest truncated before '" + key + "'");
    ++no_;
    auto toks = text::split_ws(line_);
    if (toks.empty() || toks.front() != key)
      throw ParseError("manifest line " + std::to_string(no_) + ": expected '" + key + "'");
    toks.erase(toks.begin());
    return toks;
  }

  template <typename Int> Int integer(const std::string &key) {
    auto t = next(key);
    if (t.size() != 1)
      throw ParseError("manifest line " + std::to_string(no_) + ": one value expected");
    return text::parse_int<Int>(t[0], key);
  }

  std::string where() const { return "manifest line " + std::to_string(no_); }

private:
  std::istream &in_;
  std::string line_;
  std::size_t no_ = 0;
};

Vector parse_values(std::span<const std::string_view> toks, const std::string &ctx) {
  Vector v;
  v.reserve(toks.size());
  for (auto t : toks)
    v.push_back(text::parse_double(t, ctx));
  return v;
}

} // namespace

StreamManifest load_manifest_from(std::istream &in) {
  LineReader r(in);
  if (r.integer<int>("grotta-stream") != 1)
    throw ParseError("unsupported manifest version");
  StreamManifest m;
  m.config.seed = r.integer<std::uint64_t>("seed");
  {
    auto t = r.next("gamma");
    if (t.size() != 1)
      throw ParseError(r.where() + ": one value expected");
    m.config.gamma = text::parse_double(t[0], "gamma");
  }
  m.num_classes = r.integer<std::size_t>("num_classes");
  m.input_dim = r.integer<std::size_t>("input_dim");
  m.config.batch_size = r.integer<std::size_t>("batch_size");
  m.config.periods_per_segment = r.integer<std::size_t>("periods_per_segment");
  m.config.batches_per_period = r.integer<std::size_t>("batches_per_period");
  const auto nseg = r.integer<std::size_t>("segments");
  const std::size_t d = m.input_dim;
  for (std::size_t s = 0; s < nseg; ++s) {
    auto t = r.next("segment");
    if (t.empty())
      throw ParseError(r.where() + ": segment kind missing");
    const std::string kind(t[0]);
    const std::span<const std::string_view> rest(t.data() + 1, t.size() - 1);
    const Vector v = parse_values(rest, r.where());
    if (kind == "identity" && v.empty()) {
      m.config.segments.emplace_back(IdentityTransform{});
    } else if (kind == "gaussian_noise" && v.size() == 1) {
      m.config.segments.emplace_back(GaussianNoiseTransform{v[0]});
    } else if (kind == "affine" && v.size() == d * d + d) {
      AffineTransform a{Matrix(d, d), Vector(v.begin() + d * d, v.end())};
      std::copy(v.begin(), v.begin() + d * d, a.rotation.data().begin());
      m.config.segments.emplace_back(std::move(a));
    } else if (kind == "feature_scale" && v.size() == d) {
      m.config.segments.emplace_back(FeatureScaleTransform{v});
    } else {
      throw ParseError(r.where() + ": malformed '" + kind + "' segment");
    }
  }
  m.config.validate();
  const std::size_t periods = nseg * m.config.periods_per_segment;
  for (std::size_t p = 0; p < periods; ++p) {
    auto t = r.next("period");
    Vector q = parse_values(t, r.where());
    if (q.size() != m.num_classes)
      throw ParseError(r.where() + ": expected " + std::to_string(m.num_classes) +
                       " probabilities");
    m.period_distributions.push_back(std::move(q));
  }
  for (std::size_t b = 0; b < m.config.total_batches(); ++b) {
    auto t = r.next("batch");
    if (t.size() != m.config.batch_size)
      throw ParseError(r.where() + ": expected " + std::to_string(m.config.batch_size) +
                       " indices");
    std::vector<std::size_t> idx;
    idx.reserve(t.size());
    for (auto tok : t)
      idx.push_back(text::parse_int<std::size_t>(tok, r.where()));
    m.batch_indices.push_back(std::move(idx));
  }
  r.next("end");
  return m;
}

StreamManifest load_manifest(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open manifest " + path.string());
  return load_manifest_from(in);
}

Stream replay_manifest(const BaseDataset &base, const StreamManifest &manifest) {
  if (base.features.cols() != manifest.input_dim)
    throw ShapeMismatch("manifest input_dim differs from the base dataset");
  return replay_stream(base, manifest.config, manifest.num_classes,
                       manifest.period_distributions, manifest.batch_indices);
}

} // namespace grotta
