#include "grotta/adaptation.hpp"

#include "grotta/errors.hpp"
#include "grotta/kernels.hpp"

#include <string>

namespace grotta {

void AdaptConfig::validate() const {
  if (!(nu >= 0.0 && nu <= 1.0))
    throw InvalidParameter("nu must lie in [0, 1]");
  if (lambda_batch < 0.0 || lambda_re < 0.0)
    throw InvalidParameter("loss weights must be non-negative");
  if (!(p_drop >= 0.0 && p_drop < 1.0))
    throw InvalidParameter("p_drop must lie in [0, 1)");
  if (sigma_w < 0.0 || sigma_s < 0.0)
    throw InvalidParameter("augmentation noise must be non-negative");
  if (scale_lo > scale_hi || scale_lo <= 0.0)
    throw InvalidParameter("strong scaling range must be positive and ordered");
  if (batch_size < 2)
    throw InvalidParameter("adaptation batch size must be at least 2");
}

Vector augment(std::span<const double> x, AugmentKind kind, const AdaptConfig &cfg,
               RandomSource &rng) {
  Vector out(x.begin(), x.end());
  if (kind == AugmentKind::Weak) {
    if (cfg.sigma_w > 0.0)
      for (double &v : out)
        v += cfg.sigma_w * rng.normal();
    return out;
  }
  for (double &v : out) {
    v += cfg.sigma_s * rng.normal();
    if (rng.uniform() < cfg.p_drop)
      v = 0.0;
  }
  const double scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
  for (double &v : out)
    v *= scale;
  return out;
}

Matrix augment_rows(const Matrix &x, AugmentKind kind, const AdaptConfig &cfg,
                    RandomSource &rng) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Vector v = augment(x.row(i), kind, cfg, rng);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

Views draw_views(const Matrix &x, const AdaptConfig &cfg, RandomSource &rng) {
  Views v;
  v.weak = augment_rows(x, AugmentKind::Weak, cfg, rng);
  v.strong = augment_rows(x, AugmentKind::Strong, cfg, rng);
  return v;
}

AdaptSession::AdaptSession(const Model &source, const AdaptConfig &config,
                           std::uint64_t seed)
    : config_(config), student_(source), teacher_(source), source_(source),
      bank_(config.bank_capacity, source.config().num_classes),
      adam_{config.adam, 0, {}, {}}, rng_(seed) {
  config_.validate();
}

ForwardResult AdaptSession::infer(const Matrix &x) const {
  return forward(teacher_, x, Mode::AdaptNoTrack);
}

void AdaptSession::share_global_stats() {
  teacher_.copy_globals_from(student_);
  source_.copy_globals_from(student_);
}

Matrix distillation_targets(const AdaptSession &session, const Matrix &weak) {
  Matrix targets = softmax_rows(forward(session.teacher(), weak, Mode::AdaptNoTrack).logits);
  const double lre = session.config().lambda_re;
  if (lre > 0.0) {
    const Matrix p_src =
        softmax_rows(forward(session.source(), weak, Mode::AdaptNoTrack).logits);
    for (std::size_t k = 0; k < targets.size(); ++k)
      targets.data()[k] += lre * p_src.data()[k];
  }
  return targets;
}

LossResult loss_instance(AdaptSession &session, std::span<const double> x) {
  Matrix row(1, x.size());
  std::copy(x.begin(), x.end(), row.row(0).begin());
  const Views v = draw_views(row, session.config(), session.rng());
  const Matrix targets = distillation_targets(session, v.weak);
  auto fw = forward(session.student(), v.strong, Mode::AdaptNoTrack);
  const auto ce = soft_cross_entropy(targets, fw.logits, 1.0);
  LossResult r;
  r.value = r.bank_term = ce.value;
  r.grads = backward(session.student(), fw.cache, ce.grad_logits, Scope::AffineOnly);
  return r;
}

LossResult loss_total(AdaptSession &session, const Views &bank, const Views &current) {
  if (bank.strong.rows() == 0 || current.strong.rows() == 0)
    throw EmptyBatch("loss_total needs non-empty bank and current batches");
  const double lambda_batch = session.config().lambda_batch;
  const Matrix bank_targets = distillation_targets(session, bank.weak);
  Matrix current_targets;
  if (lambda_batch > 0.0)
    current_targets = distillation_targets(session, current.weak);

  LossResult r;
  {
    auto fw = forward(session.student(), bank.strong, Mode::AdaptTrack);
    session.share_global_stats();
    const auto ce = soft_cross_entropy(
        bank_targets, fw.logits, 1.0 / static_cast<double>(bank.strong.rows()));
    r.bank_term = ce.value;
    r.grads = backward(session.student(), fw.cache, ce.grad_logits, Scope::AffineOnly);
  }
  if (lambda_batch > 0.0) {
    auto fw = forward(session.student(), current.strong, Mode::AdaptNoTrack);
    const double rows = static_cast<double>(current.strong.rows());
    const auto ce = soft_cross_entropy(current_targets, fw.logits, lambda_batch / rows);
    r.batch_term = ce.value / lambda_batch;
    accumulate(r.grads,
               backward(session.student(), fw.cache, ce.grad_logits, Scope::AffineOnly));
  }
  r.value = r.bank_term + lambda_batch * r.batch_term;
  return r;
}

LossResult loss_total(AdaptSession &session, const Matrix &bank_batch,
                      const Matrix &current_batch) {
  const Views bank = draw_views(bank_batch, session.config(), session.rng());
  const Views current = draw_views(current_batch, session.config(), session.rng());
  return loss_total(session, bank, current);
}

void teacher_ema(Model &teacher, const Model &student, double nu) {
  auto t = teacher.parameters(Scope::AffineOnly);
  const auto s = student.parameters(Scope::AffineOnly);
  if (t.size() != s.size())
    throw ShapeMismatch("teacher and student differ in structure");
  for (std::size_t a = 0; a < t.size(); ++a)
    for (std::size_t k = 0; k < t[a].size(); ++k)
      t[a][k] = (1.0 - nu) * t[a][k] + nu * s[a][k];
}

void adapt_step(AdaptSession &session, const Matrix &current_batch) {
  const Matrix bank_batch =
      session.bank().sample_matrix(session.config().batch_size, session.rng());
  if (!session.config().train) {
    const Views bank = draw_views(bank_batch, session.config(), session.rng());
    forward(session.student(), bank.strong, Mode::AdaptTrack);
    session.share_global_stats();
    session.finish_step();
    return;
  }
  const LossResult loss = loss_total(session, bank_batch, current_batch);
  const auto params = session.student().parameters(Scope::AffineOnly);
  adam_step(params, loss.grads.arrays, session.optimizer());
  teacher_ema(session.teacher(), session.student(), session.config().nu);
  session.finish_step();
}

} // namespace grotta
