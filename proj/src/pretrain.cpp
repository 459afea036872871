#include "grotta/pretrain.hpp"

#include "grotta/errors.hpp"
#include "grotta/losses.hpp"

#include <algorithm>
#include <numeric>

namespace grotta {

Model pretrain_source(const ModelConfig &config, const Matrix &features,
                      std::span<const std::size_t> labels,
                      const PretrainOptions &options, RandomSource &rng) {
  if (features.rows() == 0)
    throw EmptyDataset("no training rows");
  if (labels.size() != features.rows())
    throw ShapeMismatch("one label per training row required");
  if (features.cols() != config.input_dim)
    throw ShapeMismatch("training features do not match input_dim");
  for (std::size_t y : labels)
    if (y >= config.num_classes)
      throw InvalidClass("training label out of range");
  if (options.batch_size < 2)
    throw InvalidParameter("pretraining batch size must be at least 2");

  Model model = Model::initialize(config, rng);
  if (options.epochs == 0)
    return model;

  AdamState adam{options.adam, 0, {}, {}};
  std::vector<std::size_t> order(features.rows());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> batch_labels;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      if (stop - start < 2)
        continue;
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix x = features.gather_rows(idx);
      batch_labels.assign(idx.size(), 0);
      for (std::size_t k = 0; k < idx.size(); ++k)
        batch_labels[k] = labels[idx[k]];

      auto fw = forward(model, x, Mode::Pretrain, options.running_momentum);
      if (options.on_batch) {
        std::vector<BatchStats> stats;
        for (const auto &bc : fw.cache.blocks)
          stats.push_back(bc.norm.stats);
        options.on_batch(stats);
      }
      const auto loss = cross_entropy(fw.logits, batch_labels);
      const auto grads = backward(model, fw.cache, loss.grad_logits, Scope::All);
      const auto params = model.parameters(Scope::All);
      adam_step(params, grads.arrays, adam);
    }
  }
  model.init_globals_from_source();
  return model;
}

double accuracy(const Model &model, const Matrix &features,
                std::span<const std::size_t> labels, Mode mode) {
  if (features.rows() == 0)
    return 0.0;
  const auto fw = forward(model, features, mode);
  const auto pred = argmax_rows(fw.logits);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    correct += pred[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

} // namespace grotta
