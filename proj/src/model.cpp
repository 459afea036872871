#include "grotta/model.hpp"

#include "grotta/errors.hpp"
#include "grotta/kernels.hpp"

#include <cmath>
#include <string>

namespace grotta {

void ModelConfig::validate() const {
  if (num_classes < 2)
    throw InvalidParameter("num_classes must be at least 2");
  if (input_dim < 1)
    throw InvalidParameter("input_dim must be at least 1");
  if (hidden_dims.empty())
    throw InvalidParameter("at least one hidden block is required");
  for (std::size_t h : hidden_dims)
    if (h < 1)
      throw InvalidParameter("hidden widths must be at least 1");
}

bool mode_mutates(Mode mode) noexcept {
  return mode == Mode::Pretrain || mode == Mode::AdaptTrack;
}

namespace {

Linear make_linear(std::size_t in, std::size_t out, double bound,
                   RandomSource &rng) {
  Linear l{Matrix(in, out), Vector(out, 0.0)};
  for (double &w : l.weight.data())
    w = rng.uniform(-bound, bound);
  return l;
}

void check_linear(const Linear &l, std::size_t in, std::size_t out,
                  const std::string &what) {
  if (l.weight.rows() != in || l.weight.cols() != out || l.bias.size() != out)
    throw ShapeMismatch(what + " does not match the model config");
}

} // namespace

Model::Model(ModelConfig config, std::vector<Block> blocks, Linear head)
    : config_(std::move(config)), blocks_(std::move(blocks)),
      head_(std::move(head)) {
  config_.validate();
  if (blocks_.size() != config_.hidden_dims.size())
    throw ShapeMismatch("block count does not match hidden_dims");
  std::size_t in = config_.input_dim;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::size_t out = config_.hidden_dims[i];
    check_linear(blocks_[i].linear, in, out, "block " + std::to_string(i));
    const auto &n = blocks_[i].norm;
    if (n.gamma.size() != out || n.beta.size() != out || n.mu_g.size() != out ||
        n.sigma2_g.size() != out || n.mu_s.size() != n.sigma2_s.size() ||
        (!n.mu_s.empty() && n.mu_s.size() != out))
      throw ShapeMismatch("normalization site " + std::to_string(i) +
                          " does not match the model config");
    in = out;
  }
  check_linear(head_, in, config_.num_classes, "head");
}

Model Model::initialize(const ModelConfig &config, RandomSource &rng) {
  config.validate();
  std::vector<Block> blocks;
  std::size_t in = config.input_dim;
  for (std::size_t out : config.hidden_dims) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    blocks.push_back({make_linear(in, out, bound, rng), GpreRBNState::fresh(out)});
    in = out;
  }
  Linear head = make_linear(in, config.num_classes,
                            1.0 / std::sqrt(static_cast<double>(in)), rng);
  return Model(config, std::move(blocks), std::move(head));
}

std::vector<std::span<double>> Model::parameters(Scope scope) {
  std::vector<std::span<double>> out;
  for (auto &b : blocks_) {
    if (scope == Scope::All) {
      out.emplace_back(b.linear.weight.data());
      out.emplace_back(b.linear.bias);
    }
    out.emplace_back(b.norm.gamma);
    out.emplace_back(b.norm.beta);
  }
  if (scope == Scope::All) {
    out.emplace_back(head_.weight.data());
    out.emplace_back(head_.bias);
  }
  return out;
}

std::vector<std::span<const double>> Model::parameters(Scope scope) const {
  auto mutable_view = const_cast<Model *>(this)->parameters(scope);
  return {mutable_view.begin(), mutable_view.end()};
}

void Model::init_globals_from_source() {
  for (auto &b : blocks_)
    init_global_from_source(b.norm);
}

void Model::copy_globals_from(const Model &other) {
  if (other.blocks_.size() != blocks_.size())
    throw ShapeMismatch("copy_globals_from: block count differs");
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].norm.mu_g = other.blocks_[i].norm.mu_g;
    blocks_[i].norm.sigma2_g = other.blocks_[i].norm.sigma2_g;
  }
}

namespace {

Matrix affine(const Matrix &x, const Linear &l) {
  Matrix y = matmul(x, l.weight);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j)
      y(i, j) += l.bias[j];
  return y;
}

void relu_inplace(Matrix &m) {
  for (double &v : m.data())
    if (v < 0.0)
      v = 0.0;
}

// Shared driver; `normalize` maps (block index, pre-norm activations) to
// the normalization output.
template <typename Norm>
ForwardResult run_forward(const Model &model, const Matrix &x, Norm &&normalize) {
  if (x.cols() != model.config().input_dim)
    throw ShapeMismatch("input has " + std::to_string(x.cols()) +
                        " columns, model expects " +
                        std::to_string(model.config().input_dim));
  if (x.rows() == 0)
    throw EmptyBatch("forward on an empty batch");
  ForwardResult res;
  res.cache.blocks.reserve(model.blocks().size());
  Matrix h = x;
  for (std::size_t i = 0; i < model.blocks().size(); ++i) {
    Matrix pre = affine(h, model.blocks()[i].linear);
    NormOutput n = normalize(i, pre);
    relu_inplace(n.out);
    res.cache.blocks.push_back({std::move(h), std::move(n.cache), n.out});
    h = std::move(n.out);
  }
  res.logits = affine(h, model.head());
  res.features = std::move(h);
  return res;
}

} // namespace

ForwardResult forward(Model &model, const Matrix &x, Mode mode,
                      double running_momentum) {
  if (!mode_mutates(mode))
    return forward(static_cast<const Model &>(model), x, mode);
  return run_forward(model, x, [&](std::size_t i, const Matrix &pre) {
    GpreRBNState &state = model.blocks()[i].norm;
    if (mode == Mode::Pretrain)
      return batch_norm_forward(state, pre, running_momentum);
    return gpre_forward(state, pre, Tracking::Enable);
  });
}

ForwardResult forward(const Model &model, const Matrix &x, Mode mode) {
  if (mode_mutates(mode))
    throw InvalidParameter("a mutating forward mode needs a non-const model");
  return run_forward(model, x, [&](std::size_t i, const Matrix &pre) {
    const GpreRBNState &state = model.blocks()[i].norm;
    if (mode == Mode::BatchStats)
      return batch_norm_forward(state, pre);
    return gpre_forward(state, pre);
  });
}

namespace {

Vector to_vector(const Matrix &m) { return {m.data().begin(), m.data().end()}; }

} // namespace

Gradients backward(const Model &model, ForwardCache &cache,
                   const Matrix &grad_logits, Scope scope) {
  if (cache.consumed)
    throw StaleCache("forward cache already used by a backward pass");
  if (cache.blocks.size() != model.blocks().size())
    throw ShapeMismatch("forward cache was produced by a different model");
  const Matrix &features = cache.blocks.back().activation;
  if (grad_logits.rows() != features.rows() ||
      grad_logits.cols() != model.config().num_classes)
    throw ShapeMismatch("grad_logits shape does not match the forward");
  cache.consumed = true;

  const std::size_t nblocks = model.blocks().size();
  const std::size_t per_block = scope == Scope::All ? 4 : 2;
  Gradients g;
  g.scope = scope;
  g.arrays.resize(nblocks * per_block + (scope == Scope::All ? 2 : 0));

  if (scope == Scope::All) {
    g.arrays[nblocks * per_block] = to_vector(matmul_at_b(features, grad_logits));
    g.arrays[nblocks * per_block + 1] = column_sums(grad_logits);
  }
  Matrix grad_h = matmul_a_bt(grad_logits, model.head().weight);

  for (std::size_t bi = nblocks; bi-- > 0;) {
    auto &bc = cache.blocks[bi];
    for (std::size_t k = 0; k < grad_h.size(); ++k)
      if (bc.activation.data()[k] <= 0.0)
        grad_h.data()[k] = 0.0;
    NormGrads ng = norm_backward(bc.norm, grad_h);
    const std::size_t base = bi * per_block;
    if (scope == Scope::All) {
      g.arrays[base] = to_vector(matmul_at_b(bc.input, ng.input));
      g.arrays[base + 1] = column_sums(ng.input);
      g.arrays[base + 2] = std::move(ng.gamma);
      g.arrays[base + 3] = std::move(ng.beta);
    } else {
      g.arrays[base] = std::move(ng.gamma);
      g.arrays[base + 1] = std::move(ng.beta);
    }
    if (bi > 0)
      grad_h = matmul_a_bt(ng.input, model.blocks()[bi].linear.weight);
  }
  return g;
}

void accumulate(Gradients &into, const Gradients &from) {
  if (into.arrays.empty()) {
    into = from;
    return;
  }
  if (into.scope != from.scope || into.arrays.size() != from.arrays.size())
    throw ShapeMismatch("accumulating gradients of different scopes");
  for (std::size_t a = 0; a < into.arrays.size(); ++a) {
    if (into.arrays[a].size() != from.arrays[a].size())
      throw ShapeMismatch("accumulating gradient arrays of different sizes");
    for (std::size_t k = 0; k < into.arrays[a].size(); ++k)
      into.arrays[a][k] += from.arrays[a][k];
  }
}

} // namespace grotta
