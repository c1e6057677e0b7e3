#include "imcs/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "imcs/kernels.hpp"

namespace imcs {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::string pair_msg(const char* op, const char* what, const Matrix& a,
                     const Matrix& b) {
  return std::string(op) + ": " + what + " (" + shape_str(a) + " vs " +
         shape_str(b) + ")";
}

}  // namespace

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Matrix::bitwise_equal(const Matrix& o) const {
  if (!same_shape(o)) return false;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    // Exact representation comparison; +0.0 and -0.0 are distinct here.
    if (std::memcmp(&data_[i], &o.data_[i], sizeof(double)) != 0) return false;
  }
  return true;
}

std::size_t Tensor::rows() const { return value().rows(); }
std::size_t Tensor::cols() const { return value().cols(); }

const Matrix& Tensor::value() const {
  if (!graph_) throw ParameterError("tensor: handle is empty");
  return graph_->nodes_[id_]->value;
}

const Matrix& Tensor::grad() const {
  if (!graph_) throw ParameterError("tensor: handle is empty");
  Graph::Node& n = *graph_->nodes_[id_];
  if (n.grad.empty() && n.value.size() > 0)
    n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tensor::requires_grad() const {
  if (!graph_) throw ParameterError("tensor: handle is empty");
  return graph_->nodes_[id_]->requires_grad;
}

Graph::Node& Graph::at(Tensor t, const char* op) {
  if (t.graph_ != this)
    throw ParameterError(std::string(op) + ": tensor does not belong to this graph");
  return *nodes_[t.id_];
}

Tensor Graph::emplace(Matrix value, bool requires_grad, const char* op) {
  if (!value.all_finite())
    throw NumericalError(std::string(op) + ": produced non-finite values");
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->op = op;
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

void Graph::accumulate(Node& n, const Matrix& g) {
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  double* dst = n.grad.data();
  const double* src = g.data();
  for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
}

Tensor Graph::leaf(Matrix value, bool requires_grad) {
  return emplace(std::move(value), requires_grad, "leaf");
}

Tensor Graph::matmul(Tensor a, Tensor b) {
  Node& na = at(a, "matmul");
  Node& nb = at(b, "matmul");
  if (na.value.cols() != nb.value.rows())
    throw DimensionError(pair_msg("matmul", "inner dimensions disagree",
                                  na.value, nb.value));
  const std::size_t m = na.value.rows(), n = na.value.cols(), p = nb.value.cols();
  Matrix out(m, p);
  kernels::gemm_nn(na.value.data(), nb.value.data(), out.data(), m, n, p);
  const bool rg = na.requires_grad || nb.requires_grad;
  Tensor t = emplace(std::move(out), rg, "matmul");
  if (rg) {
    Node* pa = nodes_[a.id_].get();
    Node* pb = nodes_[b.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [pa, pb, po, m, n, p] {
      const Matrix& g = po->grad;
      if (pa->requires_grad) {
        Matrix da(m, n);
        kernels::gemm_nt(g.data(), pb->value.data(), da.data(), m, p, n);
        accumulate(*pa, da);
      }
      if (pb->requires_grad) {
        Matrix db(n, p);
        kernels::gemm_tn(pa->value.data(), g.data(), db.data(), m, n, p);
        accumulate(*pb, db);
      }
    };
  }
  return t;
}

Tensor Graph::transpose(Tensor x) {
  Node& nx = at(x, "transpose");
  const std::size_t r = nx.value.rows(), c = nx.value.cols();
  Matrix out(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = nx.value(i, j);
  Tensor t = emplace(std::move(out), nx.requires_grad, "transpose");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po, r, c] {
      Matrix dx(r, c);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dx(i, j) = po->grad(j, i);
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::softmax_rows(Tensor x, double temperature) {
  Node& nx = at(x, "softmax_rows");
  const std::size_t r = nx.value.rows(), c = nx.value.cols();
  if (c == 0) throw DimensionError("softmax_rows: input has zero columns");
  Matrix out(r, c);
  kernels::row_softmax(nx.value.data(), out.data(), r, c, temperature);
  Tensor t = emplace(std::move(out), nx.requires_grad, "softmax_rows");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po, r, c, temperature] {
      const Matrix& y = po->value;
      const Matrix& g = po->grad;
      Matrix dx(r, c);
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * y(i, j);
        for (std::size_t j = 0; j < c; ++j)
          dx(i, j) = y(i, j) * (g(i, j) - dot) / temperature;
      }
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::l2_normalize_rows(Tensor x) {
  Node& nx = at(x, "l2_normalize_rows");
  const std::size_t r = nx.value.rows(), c = nx.value.cols();
  std::vector<double> norms(r);
  Matrix out(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += nx.value(i, j) * nx.value(i, j);
    norms[i] = std::sqrt(s);
    if (norms[i] < 1e-12)
      throw DegenerateRowError("l2_normalize_rows: row " + std::to_string(i) +
                               " has near-zero norm");
    for (std::size_t j = 0; j < c; ++j) out(i, j) = nx.value(i, j) / norms[i];
  }
  Tensor t = emplace(std::move(out), nx.requires_grad, "l2_normalize_rows");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po, r, c, norms = std::move(norms)] {
      const Matrix& y = po->value;
      const Matrix& g = po->grad;
      Matrix dx(r, c);
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * y(i, j);
        for (std::size_t j = 0; j < c; ++j)
          dx(i, j) = (g(i, j) - y(i, j) * dot) / norms[i];
      }
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::add(Tensor a, Tensor b) {
  Node& na = at(a, "add");
  Node& nb = at(b, "add");
  if (!na.value.same_shape(nb.value))
    throw DimensionError(pair_msg("add", "shapes disagree", na.value, nb.value));
  Matrix out = na.value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += nb.value.data()[i];
  const bool rg = na.requires_grad || nb.requires_grad;
  Tensor t = emplace(std::move(out), rg, "add");
  if (rg) {
    Node* pa = nodes_[a.id_].get();
    Node* pb = nodes_[b.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [pa, pb, po] {
      if (pa->requires_grad) accumulate(*pa, po->grad);
      if (pb->requires_grad) accumulate(*pb, po->grad);
    };
  }
  return t;
}

Tensor Graph::sub(Tensor a, Tensor b) {
  Node& na = at(a, "sub");
  Node& nb = at(b, "sub");
  if (!na.value.same_shape(nb.value))
    throw DimensionError(pair_msg("sub", "shapes disagree", na.value, nb.value));
  Matrix out = na.value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= nb.value.data()[i];
  const bool rg = na.requires_grad || nb.requires_grad;
  Tensor t = emplace(std::move(out), rg, "sub");
  if (rg) {
    Node* pa = nodes_[a.id_].get();
    Node* pb = nodes_[b.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [pa, pb, po] {
      if (pa->requires_grad) accumulate(*pa, po->grad);
      if (pb->requires_grad) {
        Matrix db = po->grad;
        for (std::size_t i = 0; i < db.size(); ++i) db.data()[i] = -db.data()[i];
        accumulate(*pb, db);
      }
    };
  }
  return t;
}

Tensor Graph::hadamard(Tensor a, Tensor b) {
  Node& na = at(a, "hadamard");
  Node& nb = at(b, "hadamard");
  if (!na.value.same_shape(nb.value))
    throw DimensionError(pair_msg("hadamard", "shapes disagree", na.value, nb.value));
  Matrix out = na.value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= nb.value.data()[i];
  const bool rg = na.requires_grad || nb.requires_grad;
  Tensor t = emplace(std::move(out), rg, "hadamard");
  if (rg) {
    Node* pa = nodes_[a.id_].get();
    Node* pb = nodes_[b.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [pa, pb, po] {
      const Matrix& g = po->grad;
      if (pa->requires_grad) {
        Matrix da = g;
        for (std::size_t i = 0; i < da.size(); ++i)
          da.data()[i] *= pb->value.data()[i];
        accumulate(*pa, da);
      }
      if (pb->requires_grad) {
        Matrix db = g;
        for (std::size_t i = 0; i < db.size(); ++i)
          db.data()[i] *= pa->value.data()[i];
        accumulate(*pb, db);
      }
    };
  }
  return t;
}

Tensor Graph::scale(Tensor x, double s) {
  Node& nx = at(x, "scale");
  if (!std::isfinite(s)) throw ParameterError("scale: factor must be finite");
  Matrix out = nx.value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
  Tensor t = emplace(std::move(out), nx.requires_grad, "scale");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po, s] {
      Matrix dx = po->grad;
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] *= s;
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::add_scalar(Tensor x, double s) {
  Node& nx = at(x, "add_scalar");
  if (!std::isfinite(s)) throw ParameterError("add_scalar: addend must be finite");
  Matrix out = nx.value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += s;
  Tensor t = emplace(std::move(out), nx.requires_grad, "add_scalar");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po] { accumulate(*px, po->grad); };
  }
  return t;
}

Tensor Graph::add_rowvec(Tensor x, Tensor row) {
  Node& nx = at(x, "add_rowvec");
  Node& nr = at(row, "add_rowvec");
  if (nr.value.rows() != 1 || nr.value.cols() != nx.value.cols())
    throw DimensionError(pair_msg("add_rowvec", "row must be 1 x cols(x)",
                                  nx.value, nr.value));
  const std::size_t r = nx.value.rows(), c = nx.value.cols();
  Matrix out = nx.value;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) += nr.value(0, j);
  const bool rg = nx.requires_grad || nr.requires_grad;
  Tensor t = emplace(std::move(out), rg, "add_rowvec");
  if (rg) {
    Node* px = nodes_[x.id_].get();
    Node* pr = nodes_[row.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, pr, po, r, c] {
      const Matrix& g = po->grad;
      if (px->requires_grad) accumulate(*px, g);
      if (pr->requires_grad) {
        Matrix dr(1, c);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) dr(0, j) += g(i, j);
        accumulate(*pr, dr);
      }
    };
  }
  return t;
}

Tensor Graph::repeat_rows(Tensor row, std::size_t count) {
  Node& nr = at(row, "repeat_rows");
  if (nr.value.rows() != 1)
    throw DimensionError("repeat_rows: input must be a single row, got " +
                         shape_str(nr.value));
  if (count == 0) throw ParameterError("repeat_rows: count must be >= 1");
  const std::size_t c = nr.value.cols();
  Matrix out(count, c);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = nr.value(0, j);
  Tensor t = emplace(std::move(out), nr.requires_grad, "repeat_rows");
  if (nr.requires_grad) {
    Node* pr = nodes_[row.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [pr, po, count, c] {
      Matrix dr(1, c);
      for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < c; ++j) dr(0, j) += po->grad(i, j);
      accumulate(*pr, dr);
    };
  }
  return t;
}

Tensor Graph::mean_over_rows(Tensor x) {
  Node& nx = at(x, "mean_over_rows");
  const std::size_t r = nx.value.rows(), c = nx.value.cols();
  if (r == 0) throw DimensionError("mean_over_rows: input has zero rows");
  Matrix out(1, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(0, j) += nx.value(i, j);
  for (std::size_t j = 0; j < c; ++j) out(0, j) /= static_cast<double>(r);
  Tensor t = emplace(std::move(out), nx.requires_grad, "mean_over_rows");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po, r, c] {
      Matrix dx(r, c);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          dx(i, j) = po->grad(0, j) / static_cast<double>(r);
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::log(Tensor x) {
  Node& nx = at(x, "log");
  Matrix out = nx.value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::log(out.data()[i]);
  // emplace rejects the -inf/NaN that log(<=0) produces.
  Tensor t = emplace(std::move(out), nx.requires_grad, "log");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po] {
      Matrix dx = po->grad;
      for (std::size_t i = 0; i < dx.size(); ++i)
        dx.data()[i] /= px->value.data()[i];
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::relu(Tensor x) {
  Node& nx = at(x, "relu");
  Matrix out = nx.value;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.data()[i] < 0.0) out.data()[i] = 0.0;
  Tensor t = emplace(std::move(out), nx.requires_grad, "relu");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po] {
      Matrix dx = po->grad;
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (px->value.data()[i] <= 0.0) dx.data()[i] = 0.0;
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::abs(Tensor x) {
  Node& nx = at(x, "abs");
  Matrix out = nx.value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::fabs(out.data()[i]);
  Tensor t = emplace(std::move(out), nx.requires_grad, "abs");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po] {
      Matrix dx = po->grad;
      for (std::size_t i = 0; i < dx.size(); ++i) {
        const double v = px->value.data()[i];
        dx.data()[i] *= v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      }
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::max_with_constant(Tensor x, double c) {
  Node& nx = at(x, "max_with_constant");
  if (!std::isfinite(c))
    throw ParameterError("max_with_constant: bound must be finite");
  Matrix out = nx.value;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.data()[i] < c) out.data()[i] = c;
  Tensor t = emplace(std::move(out), nx.requires_grad, "max_with_constant");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po, c] {
      Matrix dx = po->grad;
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (px->value.data()[i] <= c) dx.data()[i] = 0.0;
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::sum_all(Tensor x) {
  Node& nx = at(x, "sum_all");
  double s = 0.0;
  for (std::size_t i = 0; i < nx.value.size(); ++i) s += nx.value.data()[i];
  Matrix out(1, 1);
  out(0, 0) = s;
  Tensor t = emplace(std::move(out), nx.requires_grad, "sum_all");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po] {
      Matrix dx(px->value.rows(), px->value.cols(), po->grad(0, 0));
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::mean_all(Tensor x) {
  Node& nx = at(x, "mean_all");
  if (nx.value.size() == 0) throw DimensionError("mean_all: input is empty");
  const double inv_n = 1.0 / static_cast<double>(nx.value.size());
  double s = 0.0;
  for (std::size_t i = 0; i < nx.value.size(); ++i) s += nx.value.data()[i];
  Matrix out(1, 1);
  out(0, 0) = s * inv_n;
  Tensor t = emplace(std::move(out), nx.requires_grad, "mean_all");
  if (nx.requires_grad) {
    Node* px = nodes_[x.id_].get();
    Node* po = nodes_[t.id_].get();
    po->pull = [px, po, inv_n] {
      Matrix dx(px->value.rows(), px->value.cols(), po->grad(0, 0) * inv_n);
      accumulate(*px, dx);
    };
  }
  return t;
}

Tensor Graph::detach(Tensor x) {
  Node& nx = at(x, "detach");
  return emplace(nx.value, false, "detach");
}

void Graph::backward(Tensor loss) {
  Node& root = at(loss, "backward");
  if (backward_done_)
    throw std::logic_error("backward: already ran on this graph");
  if (root.value.rows() != 1 || root.value.cols() != 1)
    throw DimensionError("backward: loss must be 1x1, got " + shape_str(root.value));
  backward_done_ = true;
  if (root.requires_grad) {
    root.grad = Matrix(1, 1, 1.0);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = *nodes_[i];
      if (n.pull && !n.grad.empty()) n.pull();
      n.pull = nullptr;
    }
  } else {
    // Loss does not depend on any trainable leaf; all gradients stay zero.
    for (auto& n : nodes_) n->pull = nullptr;
  }
}

}  // namespace imcs
