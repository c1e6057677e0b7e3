#pragma once

#include <span>
#include <vector>

#include "imcs/selflabel.hpp"
#include "imcs/tensor.hpp"

namespace imcs {

// Probabilities are clamped to this floor before any log.
inline constexpr double kProbFloor = 1e-12;

// Everything one training batch produces across its V views. The first
// n_high entries of codes/targets/posteriors/logits belong to the full-size
// views; targets exist only for those.
struct ViewBundle {
  std::vector<Codes> codes;        // V entries, each m x k'
  std::vector<Targets> targets;    // n_high entries
  std::vector<Tensor> posteriors;  // V entries, each m x k
  std::vector<Tensor> logits;      // V entries, each m x k
  std::size_t n_high = 0;
};

struct LossReport {
  double swap = 0;
  double cluster = 0;
  double penalty = 0;
  double total = 0;
};

struct TotalLoss {
  Tensor total;
  Tensor swap;
  Tensor cluster;
  Tensor penalty;
  LossReport report() const;
};

// Cross-entropy between each full-size view's balanced target and every
// other view's codes, averaged over samples and (target, predicting view)
// pairs. Targets enter as constants; gradients reach the codes only.
Tensor swap_loss(Graph& g, const ViewBundle& bundle);

// Average over ordered view pairs (i, j) of
//   conditional entropy of posterior j given codes i  -  beta * entropy of
//   posterior j's marginal (the entropy enters with a +beta * sum p log p
//   term, so minimizing spreads the marginal).
// Codes are detached inside, so this loss moves classifier weights only.
Tensor mi_cluster_loss(Graph& g, const ViewBundle& bundle, double beta);

// alpha/m * sum of max(|logit| - threshold, 0) over one m x k logit matrix.
Tensor logit_penalty(Graph& g, Tensor logits, double alpha, double threshold);

// swap_loss + mi_cluster_loss + mean over views of logit_penalty.
TotalLoss total_loss(Graph& g, const ViewBundle& bundle, double beta,
                     double alpha, double threshold);

// Jensen-Shannon divergence (natural log) between two distributions of equal
// length. Both must sum to 1 within 1e-9. Result lies in [0, ln 2].
double jsd(std::span<const double> p, std::span<const double> q);

}  // namespace imcs
