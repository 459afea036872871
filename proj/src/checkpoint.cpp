#include "grotta/checkpoint.hpp"

#include "grotta/errors.hpp"
#include "text_format.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace grotta {

namespace {

constexpr const char *kMagic = "grotta-checkpoint";
constexpr int kVersion = 1;

void write_array(std::ostream &out, const std::string &name,
                 std::span<const double> values) {
  out << name << ' ' << values.size();
  for (double v : values)
    out << ' ' << text::format_double(v);
  out << '\n';
}

class Reader {
public:
  explicit Reader(std::istream &in) : in_(in) {}

  std::istringstream line(const std::string &expected_key) {
    std::string text;
    if (!std::getline(in_, text))
      throw ParseError("checkpoint truncated before '" + expected_key + "'");
    ++line_no_;
    std::istringstream ss(text);
    std::string key;
    ss >> key;
    if (key != expected_key)
      throw ParseError("checkpoint line " + std::to_string(line_no_) +
                       ": expected '" + expected_key + "', found '" + key + "'");
    return ss;
  }

  Vector array(const std::string &name) {
    auto ss = line(name);
    std::size_t count = 0;
    if (!(ss >> count))
      throw ParseError(name + ": missing count");
    Vector v(count);
    std::string tok;
    for (std::size_t k = 0; k < count; ++k) {
      if (!(ss >> tok))
        throw ParseError(name + ": expected " + std::to_string(count) + " values");
      v[k] = text::parse_double(tok, name);
    }
    if (ss >> tok)
      throw ParseError(name + ": trailing data");
    return v;
  }

  double scalar(const std::string &name) {
    Vector v = array(name);
    if (v.size() != 1)
      throw ParseError(name + ": expected a single value");
    return v[0];
  }

private:
  std::istream &in_;
  std::size_t line_no_ = 0;
};

Matrix as_matrix(const Vector &v, std::size_t rows, std::size_t cols,
                 const std::string &name) {
  if (v.size() != rows * cols)
    throw ParseError(name + ": expected " + std::to_string(rows * cols) + " values");
  Matrix m(rows, cols);
  std::copy(v.begin(), v.end(), m.data().begin());
  return m;
}

} // namespace

void save_checkpoint(const Model &model, std::ostream &out) {
  const auto &cfg = model.config();
  out << kMagic << ' ' << kVersion << '\n';
  out << "input_dim " << cfg.input_dim << '\n';
  out << "hidden_dims " << cfg.hidden_dims.size();
  for (auto h : cfg.hidden_dims)
    out << ' ' << h;
  out << '\n';
  out << "num_classes " << cfg.num_classes << '\n';
  for (std::size_t i = 0; i < model.blocks().size(); ++i) {
    const auto &b = model.blocks()[i];
    const std::string p = "block." + std::to_string(i) + ".";
    write_array(out, p + "weight", b.linear.weight.data());
    write_array(out, p + "bias", b.linear.bias);
    write_array(out, p + "gamma", b.norm.gamma);
    write_array(out, p + "beta", b.norm.beta);
    write_array(out, p + "mu_g", b.norm.mu_g);
    write_array(out, p + "sigma2_g", b.norm.sigma2_g);
    write_array(out, p + "mu_s", b.norm.mu_s);
    write_array(out, p + "sigma2_s", b.norm.sigma2_s);
    write_array(out, p + "alpha", std::span<const double>(&b.norm.alpha, 1));
    write_array(out, p + "eps", std::span<const double>(&b.norm.eps, 1));
  }
  write_array(out, "head.weight", model.head().weight.data());
  write_array(out, "head.bias", model.head().bias);
  out << "end\n";
  if (!out)
    throw IoError("failed writing checkpoint");
}

void save_checkpoint(const Model &model, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot open " + path.string() + " for writing");
  save_checkpoint(model, out);
}

Model load_checkpoint_from(std::istream &in) {
  Reader r(in);
  {
    auto ss = r.line(kMagic);
    int version = 0;
    if (!(ss >> version) || version != kVersion)
      throw ParseError("unsupported checkpoint version");
  }
  ModelConfig cfg;
  if (!(r.line("input_dim") >> cfg.input_dim))
    throw ParseError("input_dim: missing value");
  {
    auto ss = r.line("hidden_dims");
    std::size_t k = 0;
    if (!(ss >> k))
      throw ParseError("hidden_dims: missing count");
    cfg.hidden_dims.resize(k);
    for (auto &h : cfg.hidden_dims)
      if (!(ss >> h))
        throw ParseError("hidden_dims: missing width");
  }
  if (!(r.line("num_classes") >> cfg.num_classes))
    throw ParseError("num_classes: missing value");
  cfg.validate();

  std::vector<Block> blocks;
  std::size_t in_dim = cfg.input_dim;
  for (std::size_t i = 0; i < cfg.hidden_dims.size(); ++i) {
    const std::size_t out_dim = cfg.hidden_dims[i];
    const std::string p = "block." + std::to_string(i) + ".";
    Block b;
    b.linear.weight = as_matrix(r.array(p + "weight"), in_dim, out_dim, p + "weight");
    b.linear.bias = r.array(p + "bias");
    b.norm.gamma = r.array(p + "gamma");
    b.norm.beta = r.array(p + "beta");
    b.norm.mu_g = r.array(p + "mu_g");
    b.norm.sigma2_g = r.array(p + "sigma2_g");
    b.norm.mu_s = r.array(p + "mu_s");
    b.norm.sigma2_s = r.array(p + "sigma2_s");
    b.norm.alpha = r.scalar(p + "alpha");
    b.norm.eps = r.scalar(p + "eps");
    blocks.push_back(std::move(b));
    in_dim = out_dim;
  }
  Linear head;
  head.weight = as_matrix(r.array("head.weight"), in_dim, cfg.num_classes, "head.weight");
  head.bias = r.array("head.bias");
  r.line("end");
  return Model(cfg, std::move(blocks), std::move(head));
}

Model load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw CheckpointMissing("cannot open checkpoint " + path.string());
  return load_checkpoint_from(in);
}

} // namespace grotta
