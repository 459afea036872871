#pragma once

// Robust training without forgetting: a student is trained on strongly
// augmented views to match the teacher's and the frozen source model's
// predictions on weakly augmented views. Only normalization affine
// parameters move, with one Adam step per stream batch, and the teacher
// follows the student by an exponential moving average.

#include "grotta/adam.hpp"
#include "grotta/losses.hpp"
#include "grotta/memory_bank.hpp"
#include "grotta/model.hpp"
#include "grotta/random.hpp"

#include <cstddef>
#include <cstdint>
#include <span>

namespace grotta {

struct AdaptConfig {
  double lambda_batch = 0.01; // weight of the current-batch term
  double lambda_re = 0.1;     // weight of the source regularizer
  double nu = 0.001;          // teacher EMA rate
  std::size_t batch_size = 64;
  double sigma_w = 0.01; // weak view noise std
  double sigma_s = 0.1;  // strong view noise std
  double p_drop = 0.1;   // strong view coordinate dropout
  double scale_lo = 0.8; // strong view global scaling range
  double scale_hi = 1.2;
  std::size_t bank_capacity = kDefaultBankCapacity;
  AdamConfig adam;
  // When false the student is never optimized; adapt_step only refreshes
  // the global statistics on a bank batch.
  bool train = true;

  void validate() const;
};

enum class AugmentKind { Weak, Strong };

// weak:   x + N(0, sigma_w^2 I)
// strong: (x + N(0, sigma_s^2 I)) with coordinates zeroed w.p. p_drop,
//         then scaled by U(scale_lo, scale_hi)
Vector augment(std::span<const double> x, AugmentKind kind, const AdaptConfig &cfg,
               RandomSource &rng);
Matrix augment_rows(const Matrix &x, AugmentKind kind, const AdaptConfig &cfg,
                    RandomSource &rng);

// One weak and one strong view per row, shared by both loss terms.
struct Views {
  Matrix weak;
  Matrix strong;
};
Views draw_views(const Matrix &x, const AdaptConfig &cfg, RandomSource &rng);

class AdaptSession {
public:
  // Student and teacher start as copies of `source`, whose globals must
  // already be initialized.
  AdaptSession(const Model &source, const AdaptConfig &config, std::uint64_t seed);

  Model &student() noexcept { return student_; }
  const Model &student() const noexcept { return student_; }
  Model &teacher() noexcept { return teacher_; }
  const Model &teacher() const noexcept { return teacher_; }
  const Model &source() const noexcept { return source_; }
  MemoryBank &bank() noexcept { return bank_; }
  const MemoryBank &bank() const noexcept { return bank_; }
  AdamState &optimizer() noexcept { return adam_; }
  const AdaptConfig &config() const noexcept { return config_; }
  RandomSource &rng() noexcept { return rng_; }
  std::size_t steps() const noexcept { return steps_; }

  // Teacher prediction on a stream batch, tracking disabled.
  ForwardResult infer(const Matrix &x) const;

  // Teacher and source normalize with the student's global statistics;
  // there is one logical buffer per site.
  void share_global_stats();

  void finish_step() noexcept { ++steps_; }

private:
  AdaptConfig config_;
  Model student_;
  Model teacher_;
  Model source_;
  MemoryBank bank_;
  AdamState adam_;
  RandomSource rng_;
  std::size_t steps_ = 0;
};

struct LossResult {
  double value = 0.0;      // bank term + lambda_batch * batch term
  double bank_term = 0.0;  // mean instance loss over the bank batch
  double batch_term = 0.0; // mean instance loss over the current batch
  Gradients grads;         // student affine parameters
};

// Soft targets p_T + lambda_re * p_A for the given weak views.
Matrix distillation_targets(const AdaptSession &session, const Matrix &weak);

// Instance loss of a single raw sample, with its own freshly drawn views
// and tracking disabled.
LossResult loss_instance(AdaptSession &session, std::span<const double> x);

// Targets are computed first with the current globals. The student then
// runs tracking-enabled on the bank views (updating and sharing the
// globals) and tracking-disabled on the current views.
LossResult loss_total(AdaptSession &session, const Views &bank, const Views &current);
LossResult loss_total(AdaptSession &session, const Matrix &bank_batch,
                      const Matrix &current_batch);

// theta_T <- (1 - nu) theta_T + nu theta_S over affine parameters.
void teacher_ema(Model &teacher, const Model &student, double nu);

// One time step after inference and bank insertion: sample a bank batch,
// take one Adam step on the student, update the teacher.
void adapt_step(AdaptSession &session, const Matrix &current_batch);

} // namespace grotta
