#include "grotta/baselines.hpp"

#include "grotta/errors.hpp"
#include "grotta/kernels.hpp"
#include "grotta/losses.hpp"

namespace grotta {

namespace {

Mode predict_mode(BaselineKind kind) {
  return kind == BaselineKind::Source ? Mode::Eval : Mode::BatchStats;
}

} // namespace

Matrix baseline_predict(BaselineKind kind, const Model &model, const Matrix &x) {
  if (x.rows() == 0)
    throw EmptyBatch("baseline_predict: empty batch");
  return softmax_rows(forward(model, x, predict_mode(kind)).logits);
}

void baseline_update(BaselineKind kind, Model &model, AdamState &adam, const Matrix &x) {
  if (kind == BaselineKind::Source || kind == BaselineKind::BnStat)
    return;
  if (x.rows() < 2)
    return; // batch statistics of one row carry no gradient
  ForwardResult fr = forward(static_cast<const Model &>(model), x, Mode::BatchStats);
  LossAndGrad loss;
  if (kind == BaselineKind::Pl) {
    auto labels = argmax_rows(fr.logits);
    loss = cross_entropy(fr.logits, labels);
  } else {
    loss = mean_entropy(fr.logits);
  }
  Gradients g = backward(model, fr.cache, loss.grad_logits, Scope::AffineOnly);
  auto params = model.parameters(Scope::AffineOnly);
  adam_step(params, g.arrays, adam);
}

std::vector<std::size_t> baseline_step(BaselineKind kind, Model &model, AdamState &adam,
                                       const Matrix &x) {
  auto classes = argmax_rows(baseline_predict(kind, model, x));
  baseline_update(kind, model, adam, x);
  return classes;
}

} // namespace grotta
