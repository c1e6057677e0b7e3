#pragma once

#include <cstdint>
#include <vector>

namespace imcs {

// counts[a][b] = number of samples with predicted cluster a and true class b.
struct Contingency {
  std::vector<std::vector<std::int64_t>> counts;
  std::int64_t n = 0;
};

// Minimum-cost perfect matching on a square cost matrix (shortest augmenting
// path, O(n^3)). Returns assignment[row] = column.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost);

// pred and truth must have equal length >= 1 and non-negative labels.
Contingency contingency(const std::vector<int>& pred, const std::vector<int>& truth);

// Fraction of samples correct under the best one-to-one cluster-to-class
// matching.
double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

// Mutual information normalized by the geometric mean of the two label
// entropies; 0 when either partition has a single block.
double nmi(const std::vector<int>& pred, const std::vector<int>& truth);

// Adjusted Rand index (pair counting, chance-corrected). 1 when the
// expected and maximum index coincide (degenerate but equal partitions).
double ari(const std::vector<int>& pred, const std::vector<int>& truth);

// Contingency with predicted clusters relabelled through mapping (as
// returned by hungarian), so counts[c][t] pairs matched cluster c with class t.
Contingency confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                      const std::vector<std::size_t>& mapping);

}  // namespace imcs
