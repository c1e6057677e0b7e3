// Acceptance suite: ten independent end-to-end checks of the clustering
// system, each printed as one PASS/FAIL line with its runtime and a short
// measurement summary. Exits nonzero if any check fails. All tolerances are
// pinned as named constants below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "imcs/config.hpp"
#include "imcs/container.hpp"
#include "imcs/dataviews.hpp"
#include "imcs/metrics.hpp"
#include "imcs/network.hpp"
#include "imcs/objectives.hpp"
#include "imcs/rng.hpp"
#include "imcs/selflabel.hpp"
#include "imcs/tensor.hpp"
#include "imcs/trainer.hpp"
#include "oracles.hpp"

namespace {

using imcs::Codes;
using imcs::Dataset;
using imcs::DatasetSpec;
using imcs::EvalResult;
using imcs::Graph;
using imcs::Matrix;
using imcs::ModelDims;
using imcs::ModelParams;
using imcs::Rng;
using imcs::Targets;
using imcs::Tensor;
using imcs::TrainConfig;
using imcs::Trainer;
using imcs::ViewBundle;

// ---- pinned tolerances and budgets ----
constexpr double kResidualTol = 1e-6;        // transport row/col residual
constexpr double kTransportSeconds = 1.0;    // budget for 100 solves
constexpr double kGradRelTol = 1e-4;         // finite-difference agreement
constexpr double kGradSeconds = 30.0;        // budget for the gradient sweep
constexpr double kAnalyticTol = 1e-9;        // closed-form loss values
constexpr double kLossOracleTol = 1e-12;     // loss vs. plain-loop reference
constexpr double kCostOracleTol = 1e-9;      // matching cost vs. brute force
constexpr double kAccOracleTol = 1e-12;      // matched accuracy vs. brute force
constexpr double kAccFloor = 0.95;           // end-to-end validation accuracy
constexpr double kNmiFloor = 0.85;
constexpr double kAriFloor = 0.85;
constexpr double kEndToEndSeconds = 300.0;   // budget for the three full runs
constexpr double kCentroidFloor = 0.99;      // nearest-class-mean sanity bound
constexpr double kJsdGapFloor = 0.1;         // same- vs cross-sample agreement
constexpr double kAccSpreadCap = 0.05;       // accuracy drift across code sizes
constexpr std::size_t kAblationN = 1000;     // ablation harness: dataset size
constexpr std::size_t kAblationEpochs = 40;  // ablation harness: epochs

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Matrix uniform_scores(std::size_t r, std::size_t c, std::uint64_t seed) {
  // Scores in this system are cosine similarities, so the solver is
  // exercised on [-1, 1]; unbounded score scales can make the transport
  // nearly degenerate, where balancing is legitimately slow.
  Matrix m(r, c);
  Rng rng(seed);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.data()[i] = rng.next_double() * 2.0 - 1.0;
  return m;
}

bool params_bitwise_equal(const ModelParams& a, const ModelParams& b) {
  auto ea = a.entries();
  auto eb = b.entries();
  if (ea.size() != eb.size()) return false;
  for (std::size_t i = 0; i < ea.size(); ++i)
    if (!ea[i].second->bitwise_equal(*eb[i].second)) return false;
  return true;
}

// ------------------------------------------------------------------
// 1. Balanced transport: row and column marginals settle below tolerance
//    within 200 rounds on 100 random score matrices; 3 rounds stay finite.
bool check_transport(std::string& d) {
  double worst_row = 0, worst_col = 0;
  const auto t0 = Clock::now();
  for (int i = 0; i < 100; ++i) {
    Matrix s = uniform_scores(64, 16, 9000 + static_cast<std::uint64_t>(i));
    Targets tg = imcs::sinkhorn_targets(s, 0.05, 200);
    auto [r, c] = imcs::marginal_residual(tg.q);
    worst_row = std::max(worst_row, r);
    worst_col = std::max(worst_col, c);
  }
  const double secs = seconds_since(t0);

  bool finite3 = true;
  double worst3_row = 0, worst3_col = 0;
  for (int i = 0; i < 100; ++i) {
    Matrix s = uniform_scores(64, 16, 9000 + static_cast<std::uint64_t>(i));
    Targets tg = imcs::sinkhorn_targets(s, 0.05, 3);
    auto [r, c] = imcs::marginal_residual(tg.q);
    finite3 = finite3 && std::isfinite(r) && std::isfinite(c) && tg.q.all_finite();
    worst3_row = std::max(worst3_row, r);
    worst3_col = std::max(worst3_col, c);
  }

  d = fmt("200 rounds: row %.2e col %.2e in %.2fs; 3 rounds: row %.2e col %.2e",
          worst_row, worst_col, secs, worst3_row, worst3_col);
  return worst_row < kResidualTol && worst_col < kResidualTol &&
         secs < kTransportSeconds && finite3;
}

// ------------------------------------------------------------------
// 2. Gradient integrity: every differentiable graph operation and the full
//    composite objective agree with central finite differences.

// One operation under a random linear functional so every output element
// contributes with its own weight.
double op_fd_err(int op, std::uint64_t seed) {
  Rng rng(imcs::mix_seed(seed, 0x09, static_cast<std::uint64_t>(op)));
  auto normal = [&](std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.next_normal() * scale;
    return m;
  };

  Matrix a = normal(3, 4);
  Matrix b;
  std::size_t out_r = 3, out_c = 4;
  switch (op) {
    case 0:  // matmul
      b = normal(4, 2);
      out_c = 2;
      break;
    case 1:  // transpose
      out_r = 4;
      out_c = 3;
      break;
    case 3:  // l2_normalize_rows: keep every row safely away from zero
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double norm = 0;
        for (std::size_t j = 0; j < a.cols(); ++j) norm += a(i, j) * a(i, j);
        if (std::sqrt(norm) < 0.8) a(i, 0) += 2.0;
      }
      break;
    case 4:
    case 5:
    case 6:  // add / sub / hadamard
      b = normal(3, 4);
      break;
    case 9:  // add_rowvec
      b = normal(1, 4);
      break;
    case 10:  // repeat_rows
      a = normal(1, 4);
      break;
    case 11:  // mean_over_rows
      out_r = 1;
      break;
    case 12:  // log: strictly positive inputs
      for (std::size_t i = 0; i < a.size(); ++i)
        a.data()[i] = 0.2 + std::fabs(a.data()[i]);
      break;
    case 13:  // relu: push every entry away from the kink at zero
    case 14:  // abs
      for (std::size_t i = 0; i < a.size(); ++i)
        a.data()[i] += a.data()[i] >= 0 ? 0.2 : -0.2;
      break;
    case 15:  // max_with_constant(x, 0.2): keep clear of the fold
      for (std::size_t i = 0; i < a.size(); ++i)
        if (std::fabs(a.data()[i] - 0.2) < 0.15) a.data()[i] += 0.3;
      break;
    case 16:
    case 17:  // sum_all / mean_all
      out_r = 1;
      out_c = 1;
      break;
    default:
      break;
  }
  Matrix r_weights = normal(out_r, out_c);

  std::vector<Matrix*> params{&a};
  if (!b.empty()) params.push_back(&b);

  oracle::BuildFn build = [&](std::vector<Matrix>* grads) {
    Graph g;
    Tensor ta = g.leaf(a, true);
    Tensor tb;
    if (!b.empty()) tb = g.leaf(b, true);
    Tensor out;
    switch (op) {
      case 0: out = g.matmul(ta, tb); break;
      case 1: out = g.transpose(ta); break;
      case 2: out = g.softmax_rows(ta, 0.7); break;
      case 3: out = g.l2_normalize_rows(ta); break;
      case 4: out = g.add(ta, tb); break;
      case 5: out = g.sub(ta, tb); break;
      case 6: out = g.hadamard(ta, tb); break;
      case 7: out = g.scale(ta, 0.7); break;
      case 8: out = g.add_scalar(ta, 0.3); break;
      case 9: out = g.add_rowvec(ta, tb); break;
      case 10: out = g.repeat_rows(ta, 3); break;
      case 11: out = g.mean_over_rows(ta); break;
      case 12: out = g.log(ta); break;
      case 13: out = g.relu(ta); break;
      case 14: out = g.abs(ta); break;
      case 15: out = g.max_with_constant(ta, 0.2); break;
      case 16: out = g.sum_all(ta); break;
      case 17: out = g.mean_all(ta); break;
      default: out = ta; break;
    }
    Tensor loss = g.sum_all(g.hadamard(out, g.constant(r_weights)));
    const double v = loss.value()(0, 0);
    if (grads) {
      g.backward(loss);
      grads->push_back(ta.grad());
      if (!b.empty()) grads->push_back(tb.grad());
    }
    return v;
  };
  return oracle::max_grad_rel_err(params, build);
}

// Composite objective on a small graph: per-view embeddings and a prototype
// table drive the swapped-assignment term; an independent per-view input and
// a linear head drive the agreement and range terms. Pieces the real
// training step holds fixed (balanced targets, the codes seen by the
// agreement term, the head's input) enter as constants or separate leaves,
// exactly matching which paths the analytic gradient covers.
double composite_fd_err(std::uint64_t seed) {
  constexpr std::size_t m = 4, dim = 8, kp = 6, k = 3, V = 4, n_high = 2;
  const double tau = 0.25, beta = 4.0, alpha = 0.05, threshold = 1.0;
  const double eps = 0.05;
  const int rounds = 3;

  Rng rng(imcs::mix_seed(seed, 0xc0));
  auto normal = [&](std::size_t r, std::size_t c, double scale) {
    Matrix x(r, c);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.next_normal() * scale;
    return x;
  };
  auto keep_rows_off_zero = [](Matrix& x) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double norm = 0;
      for (std::size_t j = 0; j < x.cols(); ++j) norm += x(i, j) * x(i, j);
      if (std::sqrt(norm) < 0.8) x(i, 0) += 2.0;
    }
  };

  std::vector<Matrix> z(V), x(V);
  for (std::size_t v = 0; v < V; ++v) {
    z[v] = normal(m, dim, 1.0);
    keep_rows_off_zero(z[v]);
    x[v] = normal(m, dim, 1.0);
  }
  Matrix protos = normal(kp, dim, 1.0);
  keep_rows_off_zero(protos);
  Matrix w = normal(dim, k, 0.5);
  Matrix bias = normal(1, k, 0.2);

  // Frozen pieces, evaluated once at the base parameters.
  std::vector<Matrix> u0(V), sim0(V);
  {
    Graph g;
    Tensor pn = g.l2_normalize_rows(g.constant(protos));
    for (std::size_t v = 0; v < V; ++v) {
      Tensor zn = g.l2_normalize_rows(g.constant(z[v]));
      Codes c = imcs::compute_codes(g, zn, pn, tau, static_cast<int>(v));
      u0[v] = c.u.value();
      sim0[v] = c.sim.value();
    }
  }
  std::vector<Targets> frozen_targets;
  for (std::size_t t = 0; t < n_high; ++t)
    frozen_targets.push_back(imcs::sinkhorn_targets(sim0[t], eps, rounds));

  std::vector<Matrix*> params;
  for (auto& zm : z) params.push_back(&zm);
  params.push_back(&protos);
  for (auto& xm : x) params.push_back(&xm);
  params.push_back(&w);
  params.push_back(&bias);

  oracle::BuildFn build = [&](std::vector<Matrix>* grads) {
    Graph g;
    std::vector<Tensor> z_leaves(V), x_leaves(V);
    Tensor p_leaf = g.leaf(protos, true);
    Tensor pn = g.l2_normalize_rows(p_leaf);

    ViewBundle live;
    live.n_high = n_high;
    for (std::size_t v = 0; v < V; ++v) {
      z_leaves[v] = g.leaf(z[v], true);
      Tensor zn = g.l2_normalize_rows(z_leaves[v]);
      live.codes.push_back(imcs::compute_codes(g, zn, pn, tau, static_cast<int>(v)));
    }
    live.targets = frozen_targets;
    Tensor swap = imcs::swap_loss(g, live);

    Tensor w_leaf = g.leaf(w, true);
    Tensor b_leaf = g.leaf(bias, true);
    ViewBundle head;
    head.n_high = n_high;
    head.targets = frozen_targets;
    std::vector<Tensor> logits(V);
    for (std::size_t v = 0; v < V; ++v) {
      head.codes.push_back(Codes{g.constant(u0[v]), g.constant(sim0[v]),
                                 static_cast<int>(v)});
      x_leaves[v] = g.leaf(x[v], true);
      logits[v] = g.add_rowvec(g.matmul(x_leaves[v], w_leaf), b_leaf);
      head.posteriors.push_back(g.softmax_rows(logits[v], 1.0));
      head.logits.push_back(logits[v]);
    }
    Tensor agree = imcs::mi_cluster_loss(g, head, beta);

    Tensor pen = imcs::logit_penalty(g, logits[0], alpha, threshold);
    for (std::size_t v = 1; v < V; ++v)
      pen = g.add(pen, imcs::logit_penalty(g, logits[v], alpha, threshold));
    pen = g.scale(pen, 1.0 / static_cast<double>(V));

    Tensor total = g.add(g.add(swap, agree), pen);
    const double value = total.value()(0, 0);
    if (grads) {
      g.backward(total);
      for (std::size_t v = 0; v < V; ++v) grads->push_back(z_leaves[v].grad());
      grads->push_back(p_leaf.grad());
      for (std::size_t v = 0; v < V; ++v) grads->push_back(x_leaves[v].grad());
      grads->push_back(w_leaf.grad());
      grads->push_back(b_leaf.grad());
    }
    return value;
  };
  return oracle::max_grad_rel_err(params, build);
}

bool check_gradients(std::string& d) {
  const auto t0 = Clock::now();
  constexpr int kOps = 18;
  static const char* kOpNames[kOps] = {
      "matmul", "transpose", "softmax_rows", "l2_normalize_rows", "add", "sub",
      "hadamard", "scale", "add_scalar", "add_rowvec", "repeat_rows",
      "mean_over_rows", "log", "relu", "abs", "max_with_constant", "sum_all",
      "mean_all"};
  double worst_op = 0;
  int worst_op_id = 0;
  double worst_comp = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (int op = 0; op < kOps; ++op) {
      const double e = op_fd_err(op, seed);
      if (e > worst_op) {
        worst_op = e;
        worst_op_id = op;
      }
    }
    worst_comp = std::max(worst_comp, composite_fd_err(seed));
  }
  const double secs = seconds_since(t0);
  d = fmt("worst op %.2e (%s), composite %.2e, 50 seeds in %.1fs",
          worst_op, kOpNames[worst_op_id], worst_comp, secs);
  return worst_op < kGradRelTol && worst_comp < kGradRelTol && secs < kGradSeconds;
}

// ------------------------------------------------------------------
// 3. Closed-form objective values.
bool check_analytic(std::string& d) {
  const double beta = 4.0;

  // Uniform codes: the swapped-assignment loss equals log(code count) for
  // any row-stochastic targets.
  constexpr std::size_t m = 6, kp = 16;
  double swap_val = 0;
  {
    Graph g;
    ViewBundle bundle;
    bundle.n_high = 2;
    Matrix u = Matrix::full(m, kp, 1.0 / static_cast<double>(kp));
    for (int v = 0; v < 3; ++v)
      bundle.codes.push_back(Codes{g.constant(u), g.constant(u), v});
    for (int t = 0; t < 2; ++t) {
      Targets tg;
      tg.q = oracle::random_row_stochastic(m, kp, 77 + static_cast<std::uint64_t>(t));
      bundle.targets.push_back(tg);
    }
    swap_val = imcs::swap_loss(g, bundle).value()(0, 0);
  }
  const double swap_err = std::fabs(swap_val - std::log(static_cast<double>(kp)));

  // Matching balanced one-hot codes and posteriors: conditional entropy
  // vanishes and the marginal entropy is exactly log k.
  constexpr std::size_t mm = 12, k = 3;
  Matrix one_hot(mm, k);
  for (std::size_t i = 0; i < mm; ++i) one_hot(i, i % k) = 1.0;
  Matrix uniform_post = Matrix::full(mm, k, 1.0 / static_cast<double>(k));

  auto cluster_value = [&](const Matrix& posterior) {
    Graph g;
    ViewBundle bundle;
    bundle.n_high = 2;
    for (int v = 0; v < 2; ++v) {
      bundle.codes.push_back(Codes{g.constant(one_hot), g.constant(one_hot), v});
      bundle.posteriors.push_back(g.constant(posterior));
      bundle.logits.push_back(g.constant(posterior));
    }
    return imcs::mi_cluster_loss(g, bundle, beta).value()(0, 0);
  };
  const double lnk = std::log(static_cast<double>(k));
  const double onehot_err = std::fabs(cluster_value(one_hot) - (-beta * lnk));
  const double uniform_err = std::fabs(cluster_value(uniform_post) - (1.0 - beta) * lnk);

  d = fmt("swap@uniform err %.1e, cluster@one-hot err %.1e, cluster@uniform err %.1e",
          swap_err, onehot_err, uniform_err);
  return swap_err < kAnalyticTol && onehot_err < kAnalyticTol &&
         uniform_err < kAnalyticTol;
}

// ------------------------------------------------------------------
// 4. Oracle equivalence: losses vs. plain loops, matching vs. brute force.
bool check_oracles(std::string& d) {
  constexpr std::size_t m = 6, kp = 9, k = 4, V = 4, n_high = 2;
  const double beta = 4.0, alpha = 0.03, threshold = 0.8;

  double worst_loss = 0;
  for (std::uint64_t inst = 0; inst < 100; ++inst) {
    const std::uint64_t s = imcs::mix_seed(4000, inst);
    Graph g;
    ViewBundle bundle;
    bundle.n_high = n_high;
    std::vector<Matrix> u_vals, y_vals, logit_vals;
    std::vector<Matrix> q_vals;
    for (std::size_t v = 0; v < V; ++v) {
      u_vals.push_back(oracle::random_row_stochastic(m, kp, imcs::mix_seed(s, 1, v)));
      Matrix logits = oracle::random_matrix(m, k, imcs::mix_seed(s, 2, v), 1.2);
      logit_vals.push_back(logits);
      Graph tmp;
      y_vals.push_back(tmp.softmax_rows(tmp.constant(logits), 1.0).value());
      bundle.codes.push_back(Codes{g.constant(u_vals.back()),
                                   g.constant(u_vals.back()),
                                   static_cast<int>(v)});
      bundle.posteriors.push_back(g.softmax_rows(g.constant(logits), 1.0));
      bundle.logits.push_back(g.constant(logits));
    }
    for (std::size_t t = 0; t < n_high; ++t) {
      Targets tg;
      tg.q = oracle::random_row_stochastic(m, kp, imcs::mix_seed(s, 3, t));
      q_vals.push_back(tg.q);
      bundle.targets.push_back(tg);
    }
    imcs::TotalLoss loss = imcs::total_loss(g, bundle, beta, alpha, threshold);
    imcs::LossReport rep = loss.report();

    const double swap_ref = oracle::swap_loss(u_vals, q_vals, n_high);
    const double mi_ref = oracle::mi_cluster_loss(y_vals, u_vals, beta).total;
    double pen_ref = 0;
    for (const Matrix& lg : logit_vals)
      pen_ref += oracle::logit_penalty(lg, alpha, threshold) / static_cast<double>(V);
    worst_loss = std::max({worst_loss, std::fabs(rep.swap - swap_ref),
                           std::fabs(rep.cluster - mi_ref),
                           std::fabs(rep.penalty - pen_ref),
                           std::fabs(rep.total - (swap_ref + mi_ref + pen_ref))});
  }

  double worst_cost = 0;
  double worst_acc = 0;
  Rng rng(515151);
  for (int trial = 0; trial < 1000; ++trial) {
    // random matching instance
    const std::size_t n = 2 + rng.next_u64() % 5;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (auto& row : cost)
      for (double& cell : row) cell = rng.next_normal() * 3.0;
    std::vector<std::size_t> a = imcs::hungarian(cost);
    double total = 0;
    std::vector<bool> used(n, false);
    bool valid = a.size() == n;
    for (std::size_t i = 0; valid && i < n; ++i) {
      valid = a[i] < n && !used[a[i]];
      if (valid) {
        used[a[i]] = true;
        total += cost[i][a[i]];
      }
    }
    if (!valid) {
      d = fmt("matching trial %d returned an invalid assignment", trial);
      return false;
    }
    worst_cost = std::max(worst_cost,
                          std::fabs(total - oracle::brute_force_min_cost(cost)));

    // random contingency: label vectors with at most 6 classes each
    const std::size_t len = 20 + rng.next_u64() % 41;
    const int kt = 2 + static_cast<int>(rng.next_u64() % 5);
    const int kpD = 2 + static_cast<int>(rng.next_u64() % 5);
    std::vector<int> truth(len), pred(len);
    for (std::size_t i = 0; i < len; ++i) {
      truth[i] = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(kt));
      pred[i] = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(kpD));
    }
    worst_acc = std::max(worst_acc,
                         std::fabs(imcs::clustering_accuracy(pred, truth) -
                                   oracle::brute_force_accuracy(pred, truth)));
  }

  d = fmt("losses %.1e (100 inst); matching cost %.1e, accuracy %.1e (1000 trials)",
          worst_loss, worst_cost, worst_acc);
  return worst_loss < kLossOracleTol && worst_cost < kCostOracleTol &&
         worst_acc < kAccOracleTol;
}

// ------------------------------------------------------------------
// 5. Gradient stop: the cluster-agreement loss alone must leave encoder,
//    projection and prototype gradients exactly zero.
bool check_gradient_stop(std::string& d) {
  constexpr std::size_t m = 8;
  ModelDims dims;
  dims.input_dim = 10;
  dims.encoder_hidden = {12};
  dims.embedding_dim = 8;
  dims.projection_dim = 6;
  dims.k_prime = 7;
  dims.classifier_hidden = 9;
  dims.k = 3;

  TrainConfig cfg;
  cfg.views.n_high = 2;
  cfg.views.n_low = 2;

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ModelParams params = ModelParams::init(dims, seed);
    std::vector<Matrix> views;
    for (std::size_t v = 0; v < 4; ++v)
      views.push_back(oracle::random_matrix(m, dims.input_dim,
                                            imcs::mix_seed(seed, 0x55, v)));
    Graph g;
    imcs::BoundModel model = imcs::bind_model(g, params, true);
    imcs::StepGraph sg = imcs::framework_step(g, views, model, cfg);
    g.backward(sg.loss.cluster);

    const std::size_t proto = params.prototype_entry();
    for (std::size_t i = 0; i <= proto; ++i) {
      const Matrix& gr = model.leaves[i].grad();
      Matrix zero(gr.rows(), gr.cols());
      if (!gr.bitwise_equal(zero)) {
        d = fmt("seed %llu: leaf %zu carries gradient",
                static_cast<unsigned long long>(seed), i);
        return false;
      }
    }
    double head_mag = 0;
    for (std::size_t i = proto + 1; i < model.leaves.size(); ++i) {
      const Matrix& gr = model.leaves[i].grad();
      for (std::size_t e = 0; e < gr.size(); ++e)
        head_mag = std::max(head_mag, std::fabs(gr.data()[e]));
    }
    if (head_mag == 0) {
      d = fmt("seed %llu: head gradient vanished entirely",
              static_cast<unsigned long long>(seed));
      return false;
    }
  }
  d = "encoder, projection and prototype gradients bitwise zero on 20 seeds";
  return true;
}

// ------------------------------------------------------------------
// 6./8./9. shared full-size runs.
struct FullRun {
  EvalResult ev;
  double secs = 0;
};

FullRun run_full(std::uint64_t seed, std::size_t k_prime, Dataset* keep_data) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.k_prime = k_prime;
  const auto t0 = Clock::now();
  Trainer tr = Trainer::from_config(cfg);
  while (tr.step()) {
  }
  FullRun out;
  out.ev = tr.evaluate_validation();
  out.secs = seconds_since(t0);
  if (keep_data) *keep_data = tr.data();
  return out;
}

std::vector<FullRun> g_full_runs;  // seeds 1..3 at the default code count

double nearest_class_mean_accuracy(const Dataset& data) {
  const std::size_t n = data.features.rows(), dim = data.features.cols();
  int k = 0;
  for (int lab : data.labels) k = std::max(k, lab + 1);
  Matrix means(static_cast<std::size_t>(k), dim);
  std::vector<double> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(data.labels[i]);
    counts[c] += 1;
    for (std::size_t j = 0; j < dim; ++j) means(c, j) += data.features(i, j);
  }
  for (std::size_t c = 0; c < means.rows(); ++c)
    for (std::size_t j = 0; j < dim; ++j) means(c, j) /= counts[c];
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = 0;
    for (std::size_t c = 0; c < means.rows(); ++c) {
      double dist = 0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double diff = data.features(i, j) - means(c, j);
        dist += diff * diff;
      }
      if (c == 0 || dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    if (static_cast<int>(best) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

bool check_end_to_end(std::string& d) {
  g_full_runs.clear();
  Dataset seed1_data;
  double total_secs = 0;
  double worst_acc = 1, worst_nmi = 1, worst_ari = 1;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    FullRun r = run_full(seed, 64, seed == 1 ? &seed1_data : nullptr);
    total_secs += r.secs;
    worst_acc = std::min(worst_acc, r.ev.acc);
    worst_nmi = std::min(worst_nmi, r.ev.nmi_score);
    worst_ari = std::min(worst_ari, r.ev.ari_score);
    g_full_runs.push_back(r);
  }
  const double centroid_acc = nearest_class_mean_accuracy(seed1_data);
  d = fmt("worst acc %.3f nmi %.3f ari %.3f over 3 seeds in %.0fs; "
          "class-mean sanity %.3f",
          worst_acc, worst_nmi, worst_ari, total_secs, centroid_acc);
  return worst_acc >= kAccFloor && worst_nmi >= kNmiFloor &&
         worst_ari >= kAriFloor && total_secs < kEndToEndSeconds &&
         centroid_acc >= kCentroidFloor;
}

// ------------------------------------------------------------------
// 7. Small views earn their keep: at low class separation, adding them must
//    not hurt the mean accuracy (ordering only).
bool check_ablation(std::string& d) {
  auto arm_mean = [&](std::size_t n_low) {
    double mean = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      TrainConfig cfg;
      cfg.seed = seed;
      cfg.epochs = kAblationEpochs;
      cfg.synthetic.n = kAblationN;
      cfg.synthetic.separation = 4.0;
      cfg.views.n_low = n_low;
      Trainer tr = Trainer::from_config(cfg);
      while (tr.step()) {
      }
      mean += tr.evaluate_validation().acc / 5.0;
    }
    return mean;
  };
  const double with_small = arm_mean(4);
  const double without_small = arm_mean(0);
  d = fmt("mean acc with small views %.4f, without %.4f (5 seeds each)",
          with_small, without_small);
  return with_small >= without_small;
}

// ------------------------------------------------------------------
// 8. Code agreement: trained models give two independent views of the same
//    sample much closer code distributions than views of different samples.
bool check_agreement(std::string& d) {
  if (g_full_runs.size() != 3) {
    d = "requires the end-to-end runs; they did not complete";
    return false;
  }
  const double ln2 = std::log(2.0);
  double mean_same = 0, mean_cross = 0;
  for (const FullRun& r : g_full_runs) {
    if (r.ev.jsd_same < 0 || r.ev.jsd_same > ln2 + 1e-12 || r.ev.jsd_cross < 0 ||
        r.ev.jsd_cross > ln2 + 1e-12) {
      d = fmt("divergence out of range: same %.4f cross %.4f", r.ev.jsd_same,
              r.ev.jsd_cross);
      return false;
    }
    mean_same += r.ev.jsd_same / 3.0;
    mean_cross += r.ev.jsd_cross / 3.0;
  }
  d = fmt("mean same %.4f vs cross %.4f nats (gap %.4f)", mean_same, mean_cross,
          mean_cross - mean_same);
  return mean_same < mean_cross && mean_cross - mean_same > kJsdGapFloor;
}

// ------------------------------------------------------------------
// 9. Robustness to the code-space size: accuracy moves less than the cap
//    when the prototype count quarters or doubles.
bool check_code_size(std::string& d) {
  if (g_full_runs.empty()) {
    d = "requires the end-to-end runs; they did not complete";
    return false;
  }
  const double acc64 = g_full_runs[0].ev.acc;
  const double acc32 = run_full(1, 32, nullptr).ev.acc;
  const double acc128 = run_full(1, 128, nullptr).ev.acc;
  const double spread = std::max({acc32, acc64, acc128}) -
                        std::min({acc32, acc64, acc128});
  d = fmt("acc 32:%.3f 64:%.3f 128:%.3f, spread %.3f", acc32, acc64, acc128,
          spread);
  return spread < kAccSpreadCap;
}

// ------------------------------------------------------------------
// 10. Determinism and persistence.
TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.k = 3;
  cfg.k_prime = 6;
  cfg.encoder_hidden = {12};
  cfg.embedding_dim = 8;
  cfg.projection_dim = 6;
  cfg.classifier_hidden = 8;
  cfg.warmup_iters = 10;
  cfg.views.n_low = 1;
  cfg.synthetic.n = 50;
  cfg.synthetic.input_dim = 12;
  cfg.synthetic.k_true = 3;
  cfg.eval_every = 1;
  return cfg;
}

bool check_determinism(std::string& d) {
  namespace fs = std::filesystem;
  const fs::path dir = "/tmp/imcs_acceptance";
  fs::create_directories(dir);

  // (a) two identical runs agree bitwise, parameters and predictions alike
  TrainConfig cfg = tiny_config();
  Trainer a = Trainer::from_config(cfg);
  Trainer b = Trainer::from_config(cfg);
  while (a.step()) {
  }
  while (b.step()) {
  }
  if (!params_bitwise_equal(a.params(), b.params())) {
    d = "two identical runs diverged in parameters";
    return false;
  }
  if (imcs::predict_labels(a.params(), a.data().features) !=
      imcs::predict_labels(b.params(), b.data().features)) {
    d = "two identical runs diverged in predictions";
    return false;
  }

  // (b) checkpoint round trip preserves every stored array bitwise
  const std::string ck1 = (dir / "round1.bin").string();
  const std::string ck2 = (dir / "round2.bin").string();
  a.save(ck1);
  imcs::Checkpoint ck = imcs::load_checkpoint(ck1);
  imcs::save_checkpoint(ck2, ck.params, ck.adam, ck.meta);
  auto arrays1 = imcs::read_container(ck1);
  auto arrays2 = imcs::read_container(ck2);
  if (arrays1.size() != arrays2.size()) {
    d = "round-tripped checkpoint holds a different array set";
    return false;
  }
  for (std::size_t i = 0; i < arrays1.size(); ++i)
    if (arrays1[i].name != arrays2[i].name ||
        !arrays1[i].data.bitwise_equal(arrays2[i].data)) {
      d = fmt("checkpoint array '%s' changed across a round trip",
              arrays1[i].name.c_str());
      return false;
    }

  // (c) resuming mid-epoch reproduces the uninterrupted run step for step
  TrainConfig longer = tiny_config();
  longer.epochs = 3;
  Trainer uninterrupted = Trainer::from_config(longer);
  for (int s = 0; s < 7; ++s)
    if (!uninterrupted.step()) {
      d = "uninterrupted run ended early";
      return false;
    }
  const std::string mid = (dir / "mid.bin").string();
  uninterrupted.save(mid);
  TrainConfig resumed_cfg = longer;
  resumed_cfg.resume_from = mid;
  Trainer resumed = Trainer::from_config(resumed_cfg);
  for (int s = 0; s < 5; ++s) {
    const bool mu = uninterrupted.step();
    const bool mr = resumed.step();
    if (mu != mr) {
      d = fmt("resumed run stopped out of sync at step %d", s + 1);
      return false;
    }
    if (!params_bitwise_equal(uninterrupted.params(), resumed.params())) {
      d = fmt("resumed run diverged at step %d after the checkpoint", s + 1);
      return false;
    }
  }
  d = "identical runs, checkpoint round trip, and 5 resumed steps all bitwise";
  return true;
}

}  // namespace

int main() {
  struct Check {
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Check> checks = {
      {"balanced transport residuals", check_transport},
      {"gradients match central differences", check_gradients},
      {"closed-form objective values", check_analytic},
      {"losses and matching match brute force", check_oracles},
      {"cluster head trains alone", check_gradient_stop},
      {"end-to-end clustering quality", check_end_to_end},
      {"small views do not hurt at low separation", check_ablation},
      {"code agreement separates samples", check_agreement},
      {"accuracy stable across code sizes", check_code_size},
      {"bitwise determinism and persistence", check_determinism},
  };

  int fails = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    std::string detail;
    bool ok = false;
    const auto t0 = Clock::now();
    try {
      ok = checks[i].fn(detail);
    } catch (const std::exception& e) {
      detail = fmt("exception: %s", e.what());
    }
    const double secs = seconds_since(t0);
    if (!ok) ++fails;
    std::printf("[%2zu] %s  %-44s (%7.1fs)  %s\n", i + 1, ok ? "PASS" : "FAIL",
                checks[i].name, secs, detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu acceptance checks passed\n",
              static_cast<int>(checks.size()) - fails, checks.size());
  return fails == 0 ? 0 : 1;
}
