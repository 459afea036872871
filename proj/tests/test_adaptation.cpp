#include "grotta/adaptation.hpp"
#include "grotta/errors.hpp"
#include "grotta/kernels.hpp"
#include "grotta/pretrain.hpp"
#include "grotta/streamgen.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace grotta;
using namespace grotta::testing;

namespace {

AdaptConfig small_config() {
  AdaptConfig c;
  c.batch_size = 8;
  c.bank_capacity = 32;
  return c;
}

// Reference L_total for fixed views, with the stop-gradient copies and
// the globals frozen at the values the unperturbed forwards used.
struct TotalOracle {
  Matrix bank_targets, cur_targets;
  Matrix bank_strong, cur_strong;
  std::vector<SiteStats> bank_sg, bank_globals, cur_sg, cur_globals;
  double lambda_batch = 0.0;

  double operator()(const Model &student) const {
    double v = ref_soft_ce(bank_targets, ref_forward(student, bank_strong, RefNorm::Global,
                                                     false, &bank_sg, &bank_globals),
                           1.0 / static_cast<double>(bank_strong.rows()));
    if (lambda_batch > 0.0)
      v += ref_soft_ce(cur_targets, ref_forward(student, cur_strong, RefNorm::Global, false,
                                                &cur_sg, &cur_globals),
                       lambda_batch / static_cast<double>(cur_strong.rows()));
    return v;
  }
};

Matrix ref_targets(const Model &teacher, const Model &source, const Matrix &weak,
                   double lambda_re) {
  Matrix t = softmax_rows(ref_forward(teacher, weak, RefNorm::Global));
  Matrix a = softmax_rows(ref_forward(source, weak, RefNorm::Global));
  for (std::size_t k = 0; k < t.size(); ++k)
    t.data()[k] += lambda_re * a.data()[k];
  return t;
}

// Oracle built from the session state before loss_total runs.
TotalOracle build_oracle(const AdaptSession &s, const Views &bank, const Views &cur) {
  TotalOracle o;
  o.lambda_batch = s.config().lambda_batch;
  o.bank_targets = ref_targets(s.teacher(), s.source(), bank.weak, s.config().lambda_re);
  o.cur_targets = ref_targets(s.teacher(), s.source(), cur.weak, s.config().lambda_re);
  o.bank_strong = bank.strong;
  o.cur_strong = cur.strong;
  Model student = s.student();
  RefTrace bank_trace;
  ref_forward(student, bank.strong, RefNorm::Global, true, nullptr, nullptr, &bank_trace);
  o.bank_sg = bank_trace.batch;
  o.bank_globals = bank_trace.globals;
  for (std::size_t b = 0; b < student.blocks().size(); ++b) {
    student.blocks()[b].norm.mu_g = bank_trace.globals[b].mu;
    student.blocks()[b].norm.sigma2_g = bank_trace.globals[b].sigma2;
  }
  RefTrace cur_trace;
  ref_forward(student, cur.strong, RefNorm::Global, false, nullptr, nullptr, &cur_trace);
  o.cur_sg = cur_trace.batch;
  o.cur_globals = cur_trace.globals;
  return o;
}

double affine_checksum(const Model &m) {
  double s = 0.0, k = 1.0;
  for (auto p : m.parameters(Scope::All))
    for (double v : p)
      s += (k += 0.37) * v;
  return s;
}

} // namespace

TEST(AdaptConfig, Validation) {
  AdaptConfig c;
  EXPECT_NO_THROW(c.validate());
  c.p_drop = 1.0;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c = AdaptConfig{};
  c.nu = 1.5;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c = AdaptConfig{};
  c.lambda_re = -0.1;
  EXPECT_THROW(c.validate(), InvalidParameter);
}

TEST(Augment, WeakWithZeroNoiseIsIdentity) {
  AdaptConfig c;
  c.sigma_w = 0.0;
  RandomSource rng(1);
  Vector x{1.0, -2.0, 3.5};
  EXPECT_EQ(augment(x, AugmentKind::Weak, c, rng), x);
}

TEST(Augment, WeakIsUnbiased) {
  AdaptConfig c;
  c.sigma_w = 0.5;
  RandomSource rng(2);
  Vector x{1.0, -2.0};
  const int n = 10000;
  Vector mean(2, 0.0);
  for (int i = 0; i < n; ++i) {
    Vector y = augment(x, AugmentKind::Weak, c, rng);
    mean[0] += y[0] / n;
    mean[1] += y[1] / n;
  }
  EXPECT_NEAR(mean[0], 1.0, 3 * 0.5 / std::sqrt(n));
  EXPECT_NEAR(mean[1], -2.0, 3 * 0.5 / std::sqrt(n));
}

TEST(Augment, StrongWithoutNoiseIsAGlobalScale) {
  AdaptConfig c;
  c.sigma_s = 0.0;
  c.p_drop = 0.0;
  RandomSource rng(3);
  Vector x{1.0, -2.0, 4.0};
  for (int i = 0; i < 100; ++i) {
    Vector y = augment(x, AugmentKind::Strong, c, rng);
    const double s = y[0] / x[0];
    EXPECT_GE(s, 0.8);
    EXPECT_LE(s, 1.2);
    EXPECT_NEAR(y[1], s * x[1], 1e-12);
    EXPECT_NEAR(y[2], s * x[2], 1e-12);
  }
}

TEST(Augment, StrongDropRate) {
  AdaptConfig c;
  c.sigma_s = 0.0;
  c.p_drop = 0.3;
  RandomSource rng(4);
  Vector x(50, 1.0);
  int zeros = 0;
  const int draws = 400;
  for (int i = 0; i < draws; ++i)
    for (double v : augment(x, AugmentKind::Strong, c, rng))
      zeros += v == 0.0;
  const double n = 50.0 * draws;
  EXPECT_NEAR(zeros / n, 0.3, 4 * std::sqrt(0.3 * 0.7 / n));
}

TEST(Session, StartsFromSource) {
  RandomSource rng(5);
  Model src = random_model(rng, 4, {6, 5}, 3);
  AdaptSession s(src, small_config(), 1);
  EXPECT_EQ(s.student(), src);
  EXPECT_EQ(s.teacher(), src);
  EXPECT_EQ(s.source(), src);
  EXPECT_EQ(s.steps(), 0u);
}

TEST(LossInstance, MatchesReference) {
  for (double lre : {0.0, 0.1, 2.0}) {
    RandomSource rng(6);
    Model src = random_model(rng, 4, {6, 5}, 3);
    AdaptConfig cfg = small_config();
    cfg.lambda_re = lre;
    AdaptSession s(src, cfg, 2);
    // perturb the student so teacher and student differ
    for (auto p : s.student().parameters(Scope::AffineOnly))
      for (double &v : p)
        v += rng.uniform(-0.2, 0.2);
    Vector x{0.3, -1.2, 0.7, 2.0};
    AdaptSession replay = s;
    LossResult r = loss_instance(s, x);
    Matrix row{{0.3, -1.2, 0.7, 2.0}};
    Views v = draw_views(row, replay.config(), replay.rng());
    Matrix targets = ref_targets(replay.teacher(), replay.source(), v.weak, lre);
    const double want = ref_soft_ce(targets, ref_forward(replay.student(), v.strong, RefNorm::Global), 1.0);
    EXPECT_NEAR(r.value, want, 1e-12) << "lambda_re " << lre;
    // lambda_re = 0: pure self-distillation
    if (lre == 0.0) {
      Matrix pt = softmax_rows(ref_forward(replay.teacher(), v.weak, RefNorm::Global));
      EXPECT_NEAR(r.value,
                  ref_soft_ce(pt, ref_forward(replay.student(), v.strong, RefNorm::Global), 1.0),
                  1e-15);
    }
  }
}

TEST(LossTotal, GradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < 10; ++seed) {
    RandomSource rng(200 + seed);
    Model src = random_model(rng, 8, {6, 5}, 4);
    AdaptConfig cfg = small_config();
    cfg.lambda_batch = seed % 3 == 0 ? 0.0 : 0.5;
    AdaptSession s(src, cfg, seed);
    for (auto p : s.student().parameters(Scope::AffineOnly))
      for (double &v : p)
        v += rng.uniform(-0.3, 0.3);
    Views bank = draw_views(random_matrix(rng, 8, 8, -2, 2), cfg, rng);
    Views cur = draw_views(random_matrix(rng, 8, 8, -2, 2), cfg, rng);
    TotalOracle oracle = build_oracle(s, bank, cur);
    const Model student_before = s.student();
    LossResult r = loss_total(s, bank, cur);
    EXPECT_NEAR(r.value, oracle(student_before), 1e-12);
    auto num = finite_difference(student_before, Scope::AffineOnly,
                                 [&](const Model &m) { return oracle(m); });
    EXPECT_LT(max_rel_error(r.grads.arrays, num), 1e-4) << "seed " << seed;
  }
}

TEST(LossTotal, TracksOnlyTheBankBatchAndSharesGlobals) {
  RandomSource rng(7);
  Model src = random_model(rng, 4, {6, 5}, 3);
  AdaptSession s(src, small_config(), 3);
  Views bank = draw_views(random_matrix(rng, 8, 4, -2, 2), s.config(), rng);
  Views cur = draw_views(random_matrix(rng, 8, 4, -2, 2), s.config(), rng);
  RefTrace trace;
  ref_forward(s.student(), bank.strong, RefNorm::Global, true, nullptr, nullptr, &trace);
  loss_total(s, bank, cur);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t j = 0; j < s.student().blocks()[b].norm.channels(); ++j) {
      EXPECT_NEAR(s.student().blocks()[b].norm.mu_g[j], trace.globals[b].mu[j], 1e-14);
      EXPECT_NEAR(s.student().blocks()[b].norm.sigma2_g[j], trace.globals[b].sigma2[j], 1e-14);
    }
    EXPECT_EQ(s.teacher().blocks()[b].norm.mu_g, s.student().blocks()[b].norm.mu_g);
    EXPECT_EQ(s.source().blocks()[b].norm.sigma2_g, s.student().blocks()[b].norm.sigma2_g);
  }
}

TEST(LossTotal, TargetsUsePreUpdateGlobals) {
  RandomSource rng(8);
  Model src = random_model(rng, 4, {6}, 3);
  AdaptSession s(src, small_config(), 4);
  Views bank = draw_views(random_matrix(rng, 8, 4, -3, 3), s.config(), rng);
  Views cur = draw_views(random_matrix(rng, 8, 4, -3, 3), s.config(), rng);
  TotalOracle oracle = build_oracle(s, bank, cur);
  const Model before = s.student();
  LossResult r = loss_total(s, bank, cur);
  EXPECT_NEAR(r.value, oracle(before), 1e-12);
}

TEST(LossTotal, ZeroBatchWeightIsBankMean) {
  RandomSource rng(9);
  Model src = random_model(rng, 4, {6}, 3);
  AdaptConfig cfg = small_config();
  cfg.lambda_batch = 0.0;
  AdaptSession s(src, cfg, 5);
  Views bank = draw_views(random_matrix(rng, 8, 4), cfg, rng);
  Views cur = draw_views(random_matrix(rng, 8, 4), cfg, rng);
  LossResult r = loss_total(s, bank, cur);
  EXPECT_EQ(r.value, r.bank_term);
  EXPECT_EQ(r.batch_term, 0.0);
}

TEST(LossTotal, DuplicatedBatchDoublesWithoutDrift) {
  for (double alpha : {0.0, 0.05}) {
    RandomSource rng(10);
    Model src = random_model(rng, 4, {6}, 3);
    for (auto &b : src.blocks())
      b.norm.alpha = alpha;
    AdaptConfig cfg = small_config();
    cfg.lambda_batch = 1.0;
    AdaptSession s(src, cfg, 6);
    Views v = draw_views(random_matrix(rng, 8, 4), cfg, rng);
    LossResult r = loss_total(s, v, v);
    if (alpha == 0.0)
      EXPECT_NEAR(r.value, 2.0 * r.bank_term, 1e-14);
    else
      EXPECT_NEAR(r.value, 2.0 * r.bank_term, 0.05 * r.value);
  }
}

TEST(LossTotal, EmptyBatch) {
  RandomSource rng(11);
  Model src = random_model(rng, 4, {6}, 3);
  AdaptSession s(src, small_config(), 7);
  Views empty{Matrix(0, 4), Matrix(0, 4)};
  Views some = draw_views(random_matrix(rng, 4, 4), s.config(), rng);
  EXPECT_THROW(loss_total(s, empty, some), EmptyBatch);
  EXPECT_THROW(loss_total(s, some, empty), EmptyBatch);
}

TEST(TeacherEma, Degenerate) {
  RandomSource rng(12);
  Model t = random_model(rng, 3, {4}, 2);
  Model st = random_model(rng, 3, {4}, 2);
  Model frozen = t;
  teacher_ema(frozen, st, 0.0);
  EXPECT_EQ(frozen, t);
  Model copy = t;
  teacher_ema(copy, st, 1.0);
  for (std::size_t b = 0; b < copy.blocks().size(); ++b) {
    EXPECT_EQ(copy.blocks()[b].norm.gamma, st.blocks()[b].norm.gamma);
    EXPECT_EQ(copy.blocks()[b].norm.beta, st.blocks()[b].norm.beta);
    EXPECT_EQ(copy.blocks()[b].linear, t.blocks()[b].linear);
  }
}

TEST(AdaptStep, OneAdamStepAndEmaReplay) {
  RandomSource rng(13);
  Model src = random_model(rng, 4, {6, 5}, 3);
  AdaptConfig cfg = small_config();
  cfg.nu = 0.2;
  AdaptSession s(src, cfg, 8);
  std::vector<Vector> teacher_ref;
  for (auto p : s.teacher().parameters(Scope::AffineOnly))
    teacher_ref.emplace_back(p.begin(), p.end());
  for (int step = 0; step < 25; ++step) {
    Matrix x = random_matrix(rng, 8, 4, -2, 2);
    for (std::size_t i = 0; i < x.rows(); ++i)
      s.bank().insert(x.row(i), rng.index(3));
    adapt_step(s, x);
    EXPECT_EQ(s.optimizer().step, static_cast<std::size_t>(step + 1));
    EXPECT_EQ(s.steps(), static_cast<std::size_t>(step + 1));
    auto stud = s.student().parameters(Scope::AffineOnly);
    for (std::size_t a = 0; a < stud.size(); ++a)
      for (std::size_t k = 0; k < stud[a].size(); ++k)
        teacher_ref[a][k] = 0.8 * teacher_ref[a][k] + 0.2 * stud[a][k];
  }
  auto teach = s.teacher().parameters(Scope::AffineOnly);
  for (std::size_t a = 0; a < teach.size(); ++a)
    for (std::size_t k = 0; k < teach[a].size(); ++k)
      EXPECT_NEAR(teach[a][k], teacher_ref[a][k], 1e-12);
}

TEST(AdaptStep, OnlyAffineParametersMove) {
  RandomSource rng(14);
  Model src = random_model(rng, 4, {6, 5}, 3);
  AdaptSession s(src, small_config(), 9);
  const double src_sum = affine_checksum(s.source());
  for (int step = 0; step < 30; ++step) {
    Matrix x = random_matrix(rng, 8, 4, -2, 2);
    for (std::size_t i = 0; i < x.rows(); ++i)
      s.bank().insert(x.row(i), rng.index(3));
    adapt_step(s, x);
    EXPECT_EQ(affine_checksum(s.source()), src_sum);
  }
  for (std::size_t b = 0; b < src.blocks().size(); ++b) {
    EXPECT_EQ(s.student().blocks()[b].linear, src.blocks()[b].linear);
    EXPECT_EQ(s.teacher().blocks()[b].linear, src.blocks()[b].linear);
    EXPECT_EQ(s.source().blocks()[b].norm.gamma, src.blocks()[b].norm.gamma);
    EXPECT_NE(s.student().blocks()[b].norm.gamma, src.blocks()[b].norm.gamma);
    EXPECT_EQ(s.teacher().blocks()[b].norm.mu_g, s.student().blocks()[b].norm.mu_g);
  }
  EXPECT_EQ(s.student().head(), src.head());
}

TEST(AdaptStep, WithoutTrainingOnlyGlobalsMove) {
  RandomSource rng(15);
  Model src = random_model(rng, 4, {6}, 3);
  AdaptConfig cfg = small_config();
  cfg.train = false;
  AdaptSession s(src, cfg, 10);
  Matrix x = random_matrix(rng, 8, 4, -2, 2);
  for (std::size_t i = 0; i < x.rows(); ++i)
    s.bank().insert(x.row(i), i % 3);
  adapt_step(s, x);
  EXPECT_EQ(s.optimizer().step, 0u);
  EXPECT_EQ(s.student().blocks()[0].norm.gamma, src.blocks()[0].norm.gamma);
  EXPECT_NE(s.student().blocks()[0].norm.mu_g, src.blocks()[0].norm.mu_g);
  EXPECT_EQ(s.teacher().blocks()[0].norm.mu_g, s.student().blocks()[0].norm.mu_g);
}

TEST(AdaptStep, EmptyBankThrows) {
  RandomSource rng(16);
  Model src = random_model(rng, 4, {6}, 3);
  AdaptSession s(src, small_config(), 11);
  EXPECT_THROW(adapt_step(s, random_matrix(rng, 8, 4)), EmptyBank);
}

// Larger lambda_re keeps the student closer to the source on clean data.
TEST(AdaptStep, SourceRegularizerLimitsForgetting) {
  BaseDataset ds = synth_gaussians(4, 6, 100, 5.0, 21);
  RandomSource prng(22);
  PretrainOptions po;
  po.epochs = 10;
  po.batch_size = 32;
  Model src = pretrain_source({6, {16}, 4}, ds.features, ds.labels, po, prng);
  auto kl_after = [&](double lambda_re) {
    AdaptConfig cfg;
    cfg.batch_size = 32;
    cfg.bank_capacity = 128;
    cfg.lambda_re = lambda_re;
    cfg.adam.lr = 1e-2;
    AdaptSession s(src, cfg, 23);
    RandomSource rng(24);
    for (int step = 0; step < 200; ++step) {
      // shifted, label-skewed batches
      Matrix x(32, 6);
      const std::size_t cls = static_cast<std::size_t>(step / 20) % 4;
      for (std::size_t i = 0; i < 32; ++i) {
        std::size_t row = cls + 4 * rng.index(100);
        for (std::size_t j = 0; j < 6; ++j)
          x(i, j) = 1.5 * ds.features(row, j) + 1.0;
      }
      ForwardResult fr = s.infer(x);
      auto pred = argmax_rows(fr.logits);
      for (std::size_t i = 0; i < 32; ++i)
        s.bank().insert(x.row(i), pred[i]);
      adapt_step(s, x);
    }
    Model student = s.student();
    student.copy_globals_from(src);
    Matrix p = softmax_rows(forward(src, ds.features, Mode::Eval).logits);
    Matrix q = softmax_rows(forward(student, ds.features, Mode::Eval).logits);
    double kl = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
      kl += p.data()[k] * (std::log(p.data()[k] + 1e-300) - std::log(q.data()[k] + 1e-300));
    return kl / static_cast<double>(p.rows());
  };
  const double free = kl_after(0.0);
  const double reg = kl_after(5.0);
  EXPECT_LT(reg, free);
}
