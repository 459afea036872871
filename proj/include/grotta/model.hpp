#pragma once

// Compact MLP classifier: [Linear -> GpreRBN -> ReLU] x k -> Linear.
// Reverse-mode gradients are derived by hand; the forward cache keeps
// every intermediate the backward pass needs.

#include "grotta/gprerbn.hpp"
#include "grotta/matrix.hpp"
#include "grotta/random.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace grotta {

struct ModelConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 0;

  // Throws InvalidParameter unless num_classes >= 2, input_dim >= 1, at
  // least one hidden block and every hidden width >= 1.
  void validate() const;
  bool operator==(const ModelConfig &) const = default;
};

struct Linear {
  Matrix weight; // in x out
  Vector bias;   // out
  bool operator==(const Linear &) const = default;
};

struct Block {
  Linear linear;
  GpreRBNState norm;
  bool operator==(const Block &) const = default;
};

// How each normalization site behaves during a forward.
enum class Mode {
  Pretrain,     // batch statistics, source running statistics updated
  BatchStats,   // batch statistics, nothing updated
  Eval,         // global statistics, nothing updated
  AdaptTrack,   // global statistics, EMA update on this batch
  AdaptNoTrack, // global statistics, nothing updated
};

bool mode_mutates(Mode mode) noexcept;

// Which parameters a backward pass differentiates.
enum class Scope { All, AffineOnly };

inline constexpr double kDefaultRunningMomentum = 0.1;

class Model {
public:
  Model() = default;
  // Validates shapes against the config; throws ShapeMismatch.
  Model(ModelConfig config, std::vector<Block> blocks, Linear head);

  // Kaiming-style uniform weights, zero biases, gamma = 1, beta = 0.
  static Model initialize(const ModelConfig &config, RandomSource &rng);

  const ModelConfig &config() const noexcept { return config_; }
  std::vector<Block> &blocks() noexcept { return blocks_; }
  const std::vector<Block> &blocks() const noexcept { return blocks_; }
  Linear &head() noexcept { return head_; }
  const Linear &head() const noexcept { return head_; }

  // Parameter views in canonical order. All: per block W, b, gamma, beta,
  // then head W, b. AffineOnly: per block gamma, beta.
  std::vector<std::span<double>> parameters(Scope scope);
  std::vector<std::span<const double>> parameters(Scope scope) const;

  // All normalization sites: globals <- source running statistics.
  void init_globals_from_source();
  // Copies the global statistics (not the affine parameters) of `other`.
  void copy_globals_from(const Model &other);

  bool operator==(const Model &) const = default;

private:
  ModelConfig config_;
  std::vector<Block> blocks_;
  Linear head_;
};

struct ForwardCache {
  struct BlockCache {
    Matrix input;      // block input
    NormCache norm;    // normalization intermediates
    Matrix activation; // post-ReLU output
  };
  std::vector<BlockCache> blocks;
  bool consumed = false;
};

struct ForwardResult {
  Matrix logits;   // B x C
  Matrix features; // last hidden activation, B x h_last
  ForwardCache cache;
};

ForwardResult forward(Model &model, const Matrix &x, Mode mode,
                      double running_momentum = kDefaultRunningMomentum);
// Non-mutating modes only (BatchStats, Eval, AdaptNoTrack).
ForwardResult forward(const Model &model, const Matrix &x, Mode mode);

struct Gradients {
  Scope scope = Scope::All;
  std::vector<Vector> arrays; // aligned with Model::parameters(scope)
};

// Consumes the cache; a second backward on it throws StaleCache.
Gradients backward(const Model &model, ForwardCache &cache,
                   const Matrix &grad_logits, Scope scope);

// Elementwise sum of two gradient sets of the same scope.
void accumulate(Gradients &into, const Gradients &from);

} // namespace grotta
