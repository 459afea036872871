#pragma once

// Bias-guided output adaptation. Balanced teacher predictions P are refined
// by a graph-regularized least-squares problem over the batch, whose
// minimizer is Z* = (1 - lambda) (I - lambda S)^{-1} P for a row-stochastic
// affinity S. The regularization weight comes from a batch-level imbalance
// score zeta, which also blends the one-hot refinement back with P.

#include "grotta/matrix.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace grotta {

enum class AffinityKind { Knn, Rbf };

struct AffinityConfig {
  AffinityKind kind = AffinityKind::Knn;
  std::size_t k = 5;      // neighbours per row (knn)
  double sigma_rbf = 1.0; // bandwidth (rbf)
};

// Row-stochastic B x B affinity over feature rows, with a zero diagonal.
// knn: 1/k on the k nearest other rows, distance ties to the lower index.
// rbf: exp(-d^2 / (2 sigma^2)) off the diagonal, rows normalized; a row
//      that underflows to zero becomes uniform over the other rows.
// Throws TooFewSamples if B < 2 or k > B - 1.
Matrix build_affinity(const Matrix &features, const AffinityConfig &config);

// Solves (I - lambda S) Z = (1 - lambda) P.
Matrix lsie_solve(const Matrix &p, const Matrix &s, double lambda);

struct Imbalance {
  double zeta = 0.0;
  double lambda = 0.0;
};

// zeta from the top min(C, B) argmax frequencies, renormalized, as the
// Euclidean distance to uniform; lambda = zeta^(1 / ln C).
Imbalance imbalance_lambda(const Matrix &p);

Matrix one_hot_rows(const Matrix &m);

struct RefineOptions {
  AffinityConfig affinity;
  // When set, lambda is fixed and the one-hot refinement is returned
  // without blending (no batch-level reweighting).
  std::optional<double> fixed_lambda;
};

struct RefinementResult {
  Matrix p;       // balanced predictions
  Matrix z_star;  // closed-form solution
  Matrix z_final; // reported predictions
  double zeta = 0.0;
  double lambda = 0.0;
  std::vector<std::size_t> classes; // argmax of z_final
};

// imbalance -> (shortcut to P when lambda = 0 or B < 2) -> affinity ->
// solve -> one-hot -> zeta-blend with P. knn's k is clamped to B - 1.
RefinementResult refine(const Matrix &p, const Matrix &features,
                        const RefineOptions &options);

} // namespace grotta
