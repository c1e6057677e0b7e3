#pragma once

#include <utility>

#include "imcs/tensor.hpp"

namespace imcs {

// Soft prototype assignment of one view: u = softmax(sim / temperature) where
// sim holds cosine similarities between embedding rows and prototype rows.
struct Codes {
  Tensor u;        // m x k', row-stochastic
  Tensor sim;      // m x k', similarities before the softmax
  int view_index = 0;
};

// Balanced assignment produced by the entropic solver. Plain matrices on
// purpose: targets never join the autodiff graph.
struct Targets {
  Matrix q;            // m x k', rows sum to 1
  double epsilon = 0;
  int iterations = 0;
};

// features: m x d with unit-norm rows; prototypes: k' x d with unit-norm
// rows. Differentiable in both inputs.
Codes compute_codes(Graph& g, Tensor features, Tensor prototypes,
                    double temperature, int view_index = 0);

// Entropy-regularized balanced assignment via alternating rescaling of
// K = exp(scores / epsilon) (largest entry subtracted first). Each round
// scales columns to mass 1/k', then rows to mass 1/m; the returned matrix is
// multiplied by m so every row sums to 1. With few rounds the column sums are
// only approximately equal — that is expected and callers may log the
// residual.
Targets sinkhorn_targets(const Matrix& scores, double epsilon, int iterations);

// (row, col) residuals of a candidate target: maximum |row sum - 1| and
// maximum |column sum - m/k'|.
std::pair<double, double> marginal_residual(const Matrix& q);

}  // namespace imcs
