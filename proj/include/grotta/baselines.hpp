#pragma once

// Reference methods without a memory bank or output refinement.
//   source:  frozen source statistics, no update
//   bn_stat: statistics of each test batch, no update
//   pl:      batch statistics + one hard pseudo-label CE step on affine params
//   tent:    batch statistics + one entropy minimization step on affine params

#include "grotta/adam.hpp"
#include "grotta/matrix.hpp"
#include "grotta/model.hpp"

#include <cstddef>
#include <vector>

namespace grotta {

enum class BaselineKind { Source, BnStat, Pl, Tent };

// Softmax predictions for a batch, from the model state on entry.
Matrix baseline_predict(BaselineKind kind, const Model &model, const Matrix &x);

// The method's update for a batch it has just predicted. No-op for
// source and bn_stat.
void baseline_update(BaselineKind kind, Model &model, AdamState &adam, const Matrix &x);

// predict then update; returns the argmax classes.
std::vector<std::size_t> baseline_step(BaselineKind kind, Model &model, AdamState &adam,
                                       const Matrix &x);

} // namespace grotta
