#pragma once

#include "grotta/adam.hpp"
#include "grotta/gprerbn.hpp"
#include "grotta/model.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace grotta {

struct PretrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  AdamConfig adam;
  double running_momentum = kDefaultRunningMomentum;
  // Called after every training batch with each site's batch statistics.
  std::function<void(const std::vector<BatchStats> &)> on_batch;
};

// Supervised source training with cross-entropy and Adam. Minibatches are
// reshuffled every epoch; a trailing minibatch of one row is skipped. The
// returned model has source running statistics populated and its globals
// initialized from them. With zero epochs the initialization is returned
// untouched.
Model pretrain_source(const ModelConfig &config, const Matrix &features,
                      std::span<const std::size_t> labels,
                      const PretrainOptions &options, RandomSource &rng);

double accuracy(const Model &model, const Matrix &features,
                std::span<const std::size_t> labels, Mode mode = Mode::Eval);

} // namespace grotta
