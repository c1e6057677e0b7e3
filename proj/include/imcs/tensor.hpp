#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "imcs/errors.hpp"

namespace imcs {

// Dense row-major matrix of doubles. The only value type in the project;
// vectors are 1 x n or n x 1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
  static Matrix full(std::size_t rows, std::size_t cols, double v) {
    return {rows, cols, v};
  }
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool all_finite() const;
  bool bitwise_equal(const Matrix& o) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class Graph;

// Handle to a node owned by a Graph. Cheap to copy; invalid once the graph
// is destroyed.
class Tensor {
 public:
  Tensor() = default;

  std::size_t rows() const;
  std::size_t cols() const;
  const Matrix& value() const;
  // Accumulated gradient; a zero matrix if backward never reached this node.
  const Matrix& grad() const;
  bool requires_grad() const;
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Tensor(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Records one forward pass; backward() walks the nodes in
// reverse recording order exactly once and then drops the recorded closures.
// Gradients accumulate additively, so a tensor consumed twice receives the
// sum of both contributions. Every operation validates shapes up front and
// checks its output for NaN/Inf.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Inserts a value into the graph. requires_grad marks trainable leaves.
  Tensor leaf(Matrix value, bool requires_grad = false);
  Tensor constant(Matrix value) { return leaf(std::move(value), false); }

  Tensor matmul(Tensor a, Tensor b);
  Tensor transpose(Tensor x);
  Tensor softmax_rows(Tensor x, double temperature);
  Tensor l2_normalize_rows(Tensor x);
  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor hadamard(Tensor a, Tensor b);
  Tensor scale(Tensor x, double s);
  Tensor add_scalar(Tensor x, double s);
  // x + row broadcast over every row of x; row must be 1 x cols.
  Tensor add_rowvec(Tensor x, Tensor row);
  // Stacks `count` copies of a 1 x n row.
  Tensor repeat_rows(Tensor row, std::size_t count);
  // Column means, 1 x n output.
  Tensor mean_over_rows(Tensor x);
  Tensor log(Tensor x);
  Tensor relu(Tensor x);
  Tensor abs(Tensor x);
  // Elementwise max(x, c).
  Tensor max_with_constant(Tensor x, double c);
  Tensor sum_all(Tensor x);
  Tensor mean_all(Tensor x);
  // Value copy with gradient flow cut.
  Tensor detach(Tensor x);

  // Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1x1. A second
  // call on the same graph throws.
  void backward(Tensor loss);
  bool backward_done() const { return backward_done_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // lazily allocated on first accumulation
    bool requires_grad = false;
    const char* op = "leaf";
    std::function<void()> pull;
  };

  friend class Tensor;

  Node& at(Tensor t, const char* op);
  Tensor emplace(Matrix value, bool requires_grad, const char* op);
  static void accumulate(Node& n, const Matrix& g);

  std::vector<std::unique_ptr<Node>> nodes_;
  bool backward_done_ = false;
};

}  // namespace imcs
