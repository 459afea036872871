#pragma once

// Dense kernels used by every other module. The functions in `grotta`
// are OpenMP-parallel over output rows; `grotta::serial` holds the
// single-threaded reference versions the tests compare against. Both
// compute each output entry with the same loop order, so results agree
// bit for bit regardless of thread count.

#include "grotta/matrix.hpp"
#include "grotta/random.hpp"

#include <cstddef>

namespace grotta {

// A * B
Matrix matmul(const Matrix &a, const Matrix &b);
// A^T * B
Matrix matmul_at_b(const Matrix &a, const Matrix &b);
// A * B^T
Matrix matmul_a_bt(const Matrix &a, const Matrix &b);

Matrix softmax_rows(const Matrix &logits);
Matrix log_softmax_rows(const Matrix &logits);
Matrix pairwise_sq_dist(const Matrix &features);

// Solves A X = B by Gaussian elimination with partial pivoting.
// Throws SingularMatrix if a pivot falls below 1e-12 in magnitude.
Matrix solve_linear(const Matrix &a, const Matrix &b);

// Symmetric Dirichlet(gamma, ..., gamma) draw of length `classes`.
Vector dirichlet_sample(double gamma, std::size_t classes, RandomSource &rng);

inline constexpr double kPivotTolerance = 1e-12;

namespace serial {

Matrix matmul(const Matrix &a, const Matrix &b);
Matrix matmul_at_b(const Matrix &a, const Matrix &b);
Matrix matmul_a_bt(const Matrix &a, const Matrix &b);
Matrix softmax_rows(const Matrix &logits);
Matrix log_softmax_rows(const Matrix &logits);
Matrix pairwise_sq_dist(const Matrix &features);
Matrix solve_linear(const Matrix &a, const Matrix &b);

} // namespace serial

} // namespace grotta
