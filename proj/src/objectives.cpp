#include "imcs/objectives.hpp"

#include <cmath>
#include <string>

#include "imcs/errors.hpp"

namespace imcs {

namespace {

void check_bundle(const ViewBundle& bundle, const char* op) {
  const std::size_t v = bundle.codes.size();
  if (v < 2) throw ConfigError(std::string(op) + ": need at least 2 views");
  if (bundle.n_high < 2)
    throw ConfigError(std::string(op) + ": need at least 2 full-size views");
  if (bundle.n_high > v)
    throw ConfigError(std::string(op) + ": n_high exceeds view count");
  const std::size_t m = bundle.codes[0].u.rows();
  const std::size_t k = bundle.codes[0].u.cols();
  for (const auto& c : bundle.codes)
    if (c.u.rows() != m || c.u.cols() != k)
      throw DimensionError(std::string(op) + ": code shapes disagree across views");
}

}  // namespace

LossReport TotalLoss::report() const {
  LossReport r;
  r.swap = swap.value()(0, 0);
  r.cluster = cluster.value()(0, 0);
  r.penalty = penalty.value()(0, 0);
  r.total = total.value()(0, 0);
  return r;
}

Tensor swap_loss(Graph& g, const ViewBundle& bundle) {
  check_bundle(bundle, "swap_loss");
  if (bundle.targets.size() != bundle.n_high)
    throw DimensionError("swap_loss: expected one target per full-size view");
  const std::size_t m = bundle.codes[0].u.rows();
  const std::size_t kp = bundle.codes[0].u.cols();
  const std::size_t v = bundle.codes.size();

  // Log-codes are shared across all pairs that predict from the same view.
  std::vector<Tensor> log_u(v);
  for (std::size_t i = 0; i < v; ++i)
    log_u[i] = g.log(g.max_with_constant(bundle.codes[i].u, kProbFloor));

  Tensor acc;
  std::size_t pairs = 0;
  for (std::size_t t = 0; t < bundle.n_high; ++t) {
    const Matrix& q = bundle.targets[t].q;
    if (q.rows() != m || q.cols() != kp)
      throw DimensionError("swap_loss: target " + std::to_string(t) +
                           " shape does not match codes");
    Tensor qc = g.constant(q);
    for (std::size_t i = 0; i < v; ++i) {
      if (i == t) continue;
      Tensor term = g.sum_all(g.hadamard(qc, log_u[i]));
      acc = acc.valid() ? g.add(acc, term) : term;
      ++pairs;
    }
  }
  const double norm = -1.0 / (static_cast<double>(m) * static_cast<double>(pairs));
  return g.scale(acc, norm);
}

Tensor mi_cluster_loss(Graph& g, const ViewBundle& bundle, double beta) {
  check_bundle(bundle, "mi_cluster_loss");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw ParameterError("mi_cluster_loss: beta must be >= 0 and finite");
  const std::size_t v = bundle.codes.size();
  if (bundle.posteriors.size() != v)
    throw DimensionError("mi_cluster_loss: expected one posterior per view");
  const std::size_t m = bundle.codes[0].u.rows();
  const std::size_t k = bundle.posteriors[0].cols();
  for (const auto& y : bundle.posteriors) {
    if (y.rows() != m || y.cols() != k)
      throw DimensionError("mi_cluster_loss: posterior shapes disagree across views");
    for (std::size_t i = 0; i < m; ++i) {
      double rs = 0.0;
      for (std::size_t j = 0; j < k; ++j) rs += y.value()(i, j);
      if (std::fabs(rs - 1.0) > 1e-9)
        throw ParameterError("mi_cluster_loss: posterior rows must sum to 1");
    }
  }

  // Per-view pieces reused across all ordered pairs. Codes are detached: the
  // assignment side of the contingency is a fixed target here.
  std::vector<Tensor> u_det(v), log_pu_rep(v);
  for (std::size_t i = 0; i < v; ++i) {
    u_det[i] = g.detach(bundle.codes[i].u);
    Tensor pu = g.mean_over_rows(u_det[i]);  // 1 x k'
    log_pu_rep[i] = g.repeat_rows(g.log(g.max_with_constant(pu, kProbFloor)), k);
  }

  const double inv_m = 1.0 / static_cast<double>(m);
  Tensor acc;
  for (std::size_t j = 0; j < v; ++j) {
    Tensor yt = g.transpose(bundle.posteriors[j]);  // k x m
    Tensor py = g.mean_over_rows(bundle.posteriors[j]);
    Tensor neg_h_y =
        g.sum_all(g.hadamard(py, g.log(g.max_with_constant(py, kProbFloor))));
    Tensor ent_term = g.scale(neg_h_y, beta);
    for (std::size_t i = 0; i < v; ++i) {
      Tensor p_yu = g.scale(g.matmul(yt, u_det[i]), inv_m);  // k x k'
      Tensor log_p = g.log(g.max_with_constant(p_yu, kProbFloor));
      Tensor cond =
          g.sum_all(g.hadamard(p_yu, g.sub(log_pu_rep[i], log_p)));
      Tensor term = g.add(cond, ent_term);
      acc = acc.valid() ? g.add(acc, term) : term;
    }
  }
  return g.scale(acc, 1.0 / static_cast<double>(v * v));
}

Tensor logit_penalty(Graph& g, Tensor logits, double alpha, double threshold) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw ParameterError("logit_penalty: alpha must be >= 0 and finite");
  if (!(threshold > 0.0) || !std::isfinite(threshold))
    throw ParameterError("logit_penalty: threshold must be positive and finite");
  const std::size_t m = logits.rows();
  if (m == 0) throw DimensionError("logit_penalty: logits must be non-empty");
  Tensor excess = g.relu(g.add_scalar(g.abs(logits), -threshold));
  return g.scale(g.sum_all(excess), alpha / static_cast<double>(m));
}

TotalLoss total_loss(Graph& g, const ViewBundle& bundle, double beta,
                     double alpha, double threshold) {
  check_bundle(bundle, "total_loss");
  if (bundle.logits.size() != bundle.codes.size())
    throw DimensionError("total_loss: expected one logit matrix per view");
  TotalLoss out;
  out.swap = swap_loss(g, bundle);
  out.cluster = mi_cluster_loss(g, bundle, beta);
  Tensor pen;
  for (const auto& logit : bundle.logits) {
    Tensor p = logit_penalty(g, logit, alpha, threshold);
    pen = pen.valid() ? g.add(pen, p) : p;
  }
  out.penalty = g.scale(pen, 1.0 / static_cast<double>(bundle.logits.size()));
  out.total = g.add(g.add(out.swap, out.cluster), out.penalty);
  return out;
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw DimensionError("jsd: distributions have different lengths");
  if (p.empty()) throw DimensionError("jsd: distributions are empty");
  double sp = 0.0, sq = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ParameterError("jsd: entries must be finite and >= 0");
    sp += v;
  }
  for (double v : q) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ParameterError("jsd: entries must be finite and >= 0");
    sq += v;
  }
  if (std::fabs(sp - 1.0) > 1e-9 || std::fabs(sq - 1.0) > 1e-9)
    throw ParameterError("jsd: inputs must sum to 1");

  double kl_p = 0.0, kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > kProbFloor) kl_p += p[i] * std::log(p[i] / m);
    if (q[i] > kProbFloor) kl_q += q[i] * std::log(q[i] / m);
  }
  return 0.5 * (kl_p + kl_q);
}

}  // namespace imcs
