#include "imcs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "imcs/errors.hpp"

namespace imcs {

namespace {

// Shared label validation: equal non-zero lengths, labels >= 0. Returns
// (max_pred + 1, max_truth + 1).
std::pair<std::size_t, std::size_t> label_ranges(const std::vector<int>& pred,
                                                 const std::vector<int>& truth,
                                                 const char* op) {
  if (pred.size() != truth.size())
    throw DimensionError(std::string(op) + ": label vectors have different lengths");
  if (pred.empty())
    throw DimensionError(std::string(op) + ": label vectors are empty");
  int mp = 0, mt = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0)
      throw ParameterError(std::string(op) + ": labels must be non-negative");
    mp = std::max(mp, pred[i]);
    mt = std::max(mt, truth[i]);
  }
  return {static_cast<std::size_t>(mp) + 1, static_cast<std::size_t>(mt) + 1};
}

double log_safe(double x) { return std::log(x); }

}  // namespace

std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) throw DimensionError("hungarian: cost matrix is empty");
  for (const auto& row : cost) {
    if (row.size() != n)
      throw DimensionError("hungarian: cost matrix must be square");
    for (double v : row)
      if (!std::isfinite(v))
        throw NumericalError("hungarian: cost matrix has non-finite entries");
  }

  const double inf = std::numeric_limits<double>::infinity();
  // Potentials and matching over 1-based indices; p[j] is the row matched to
  // column j, column 0 is the virtual start of each augmenting search.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

Contingency contingency(const std::vector<int>& pred, const std::vector<int>& truth) {
  const auto [kp, kt] = label_ranges(pred, truth, "contingency");
  Contingency c;
  c.n = static_cast<std::int64_t>(pred.size());
  c.counts.assign(kp, std::vector<std::int64_t>(kt, 0));
  for (std::size_t i = 0; i < pred.size(); ++i)
    ++c.counts[static_cast<std::size_t>(pred[i])][static_cast<std::size_t>(truth[i])];
  return c;
}

double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  const Contingency c = contingency(pred, truth);
  const std::size_t kp = c.counts.size();
  const std::size_t kt = c.counts[0].size();
  const std::size_t k = std::max(kp, kt);
  // Pad to square and negate: maximum agreement = minimum-cost matching.
  std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
  for (std::size_t a = 0; a < kp; ++a)
    for (std::size_t b = 0; b < kt; ++b)
      cost[a][b] = -static_cast<double>(c.counts[a][b]);
  const auto assignment = hungarian(cost);
  std::int64_t agree = 0;
  for (std::size_t a = 0; a < kp; ++a)
    if (assignment[a] < kt) agree += c.counts[a][assignment[a]];
  return static_cast<double>(agree) / static_cast<double>(c.n);
}

double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
  const Contingency c = contingency(pred, truth);
  const std::size_t kp = c.counts.size();
  const std::size_t kt = c.counts[0].size();
  const double n = static_cast<double>(c.n);

  std::vector<double> row_sum(kp, 0.0), col_sum(kt, 0.0);
  for (std::size_t a = 0; a < kp; ++a)
    for (std::size_t b = 0; b < kt; ++b) {
      row_sum[a] += static_cast<double>(c.counts[a][b]);
      col_sum[b] += static_cast<double>(c.counts[a][b]);
    }

  double h_pred = 0.0, h_truth = 0.0, mi = 0.0;
  for (std::size_t a = 0; a < kp; ++a)
    if (row_sum[a] > 0.0) h_pred -= row_sum[a] / n * log_safe(row_sum[a] / n);
  for (std::size_t b = 0; b < kt; ++b)
    if (col_sum[b] > 0.0) h_truth -= col_sum[b] / n * log_safe(col_sum[b] / n);
  for (std::size_t a = 0; a < kp; ++a)
    for (std::size_t b = 0; b < kt; ++b) {
      const double nab = static_cast<double>(c.counts[a][b]);
      if (nab > 0.0) mi += nab / n * log_safe(n * nab / (row_sum[a] * col_sum[b]));
    }

  const double denom = std::sqrt(h_pred * h_truth);
  if (denom <= 0.0) return 0.0;  // a single-block partition carries no information
  return mi / denom;
}

double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
  const Contingency c = contingency(pred, truth);
  const std::size_t kp = c.counts.size();
  const std::size_t kt = c.counts[0].size();

  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };

  std::vector<double> row_sum(kp, 0.0), col_sum(kt, 0.0);
  double index = 0.0;
  for (std::size_t a = 0; a < kp; ++a)
    for (std::size_t b = 0; b < kt; ++b) {
      const double nab = static_cast<double>(c.counts[a][b]);
      row_sum[a] += nab;
      col_sum[b] += nab;
      index += pairs(nab);
    }
  double sum_row = 0.0, sum_col = 0.0;
  for (double v : row_sum) sum_row += pairs(v);
  for (double v : col_sum) sum_col += pairs(v);

  const double total = pairs(static_cast<double>(c.n));
  if (total <= 0.0) return 1.0;  // a single sample: partitions trivially agree
  const double expected = sum_row * sum_col / total;
  const double max_index = 0.5 * (sum_row + sum_col);
  if (std::fabs(max_index - expected) < 1e-12) return 1.0;
  return (index - expected) / (max_index - expected);
}

Contingency confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                      const std::vector<std::size_t>& mapping) {
  const auto [kp, kt] = label_ranges(pred, truth, "confusion");
  if (mapping.size() < kp)
    throw DimensionError("confusion: mapping shorter than cluster count");
  std::size_t max_mapped = 0;
  for (std::size_t a = 0; a < kp; ++a) max_mapped = std::max(max_mapped, mapping[a]);
  const std::size_t k = std::max(max_mapped + 1, kt);
  Contingency c;
  c.n = static_cast<std::int64_t>(pred.size());
  c.counts.assign(k, std::vector<std::int64_t>(k, 0));
  for (std::size_t i = 0; i < pred.size(); ++i)
    ++c.counts[mapping[static_cast<std::size_t>(pred[i])]]
              [static_cast<std::size_t>(truth[i])];
  return c;
}

}  // namespace imcs
