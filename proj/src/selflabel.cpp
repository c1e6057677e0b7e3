#include "imcs/selflabel.hpp"

#include <cmath>
#include <string>

#include "imcs/errors.hpp"

namespace imcs {

Codes compute_codes(Graph& g, Tensor features, Tensor prototypes,
                    double temperature, int view_index) {
  if (features.cols() != prototypes.cols())
    throw DimensionError("compute_codes: feature dim " +
                         std::to_string(features.cols()) +
                         " != prototype dim " + std::to_string(prototypes.cols()));
  Codes c;
  c.sim = g.matmul(features, g.transpose(prototypes));
  c.u = g.softmax_rows(c.sim, temperature);
  c.view_index = view_index;
  return c;
}

Targets sinkhorn_targets(const Matrix& scores, double epsilon, int iterations) {
  const std::size_t m = scores.rows(), k = scores.cols();
  if (m == 0 || k == 0)
    throw DimensionError("sinkhorn_targets: scores must be non-empty");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ParameterError("sinkhorn_targets: epsilon must be positive and finite");
  if (iterations < 1)
    throw ParameterError("sinkhorn_targets: iterations must be >= 1");
  if (!scores.all_finite())
    throw NumericalError("sinkhorn_targets: scores contain non-finite values");

  // K = exp(scores / epsilon), with the global max subtracted so the largest
  // exponent is 0. The subtraction cancels in the rescaling, so it changes
  // nothing about the result while keeping exp() in range.
  double mx = scores.data()[0];
  for (std::size_t i = 1; i < scores.size(); ++i)
    mx = std::max(mx, scores.data()[i]);
  Matrix q(m, k);
  for (std::size_t i = 0; i < scores.size(); ++i)
    q.data()[i] = std::exp((scores.data()[i] - mx) / epsilon);

  const double col_target = 1.0 / static_cast<double>(k);
  const double row_target = 1.0 / static_cast<double>(m);
  std::vector<double> col_sum(k);
  for (int it = 0; it < iterations; ++it) {
    // Columns to mass 1/k', then rows to mass 1/m.
    for (std::size_t j = 0; j < k; ++j) col_sum[j] = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) col_sum[j] += q(i, j);
    for (std::size_t j = 0; j < k; ++j) {
      if (!(col_sum[j] > 0.0) || !std::isfinite(col_sum[j]))
        throw NumericalError("sinkhorn_targets: column mass underflowed to zero");
      col_sum[j] = col_target / col_sum[j];
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) q(i, j) *= col_sum[j];

    for (std::size_t i = 0; i < m; ++i) {
      double rs = 0.0;
      for (std::size_t j = 0; j < k; ++j) rs += q(i, j);
      if (!(rs > 0.0) || !std::isfinite(rs))
        throw NumericalError("sinkhorn_targets: row mass underflowed to zero");
      const double f = row_target / rs;
      for (std::size_t j = 0; j < k; ++j) q(i, j) *= f;
    }
  }

  // Rows currently sum to 1/m; scale so each row is a distribution.
  for (std::size_t i = 0; i < q.size(); ++i) q.data()[i] *= static_cast<double>(m);
  if (!q.all_finite())
    throw NumericalError("sinkhorn_targets: produced non-finite values");

  Targets t;
  t.q = std::move(q);
  t.epsilon = epsilon;
  t.iterations = iterations;
  return t;
}

std::pair<double, double> marginal_residual(const Matrix& q) {
  const std::size_t m = q.rows(), k = q.cols();
  if (m == 0 || k == 0)
    throw DimensionError("marginal_residual: input must be non-empty");
  const double col_target = static_cast<double>(m) / static_cast<double>(k);
  double row_res = 0.0;
  std::vector<double> col_sum(k, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double rs = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      rs += q(i, j);
      col_sum[j] += q(i, j);
    }
    row_res = std::max(row_res, std::fabs(rs - 1.0));
  }
  double col_res = 0.0;
  for (std::size_t j = 0; j < k; ++j)
    col_res = std::max(col_res, std::fabs(col_sum[j] - col_target));
  return {row_res, col_res};
}

}  // namespace imcs
