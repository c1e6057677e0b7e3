#include "imcs/kernels.hpp"

#include <cmath>
#include <vector>

#include "imcs/errors.hpp"

namespace imcs::kernels {

namespace {

int g_threads = 1;

// Per-output-row routines shared by the serial and parallel entry points.
// Keeping one body per row pins the accumulation order of every output
// element (ascending over the inner index), which is what makes serial and
// parallel results bitwise equal; the column blocking only interleaves
// independent accumulator chains to hide FP-add latency, it never reorders
// any single element's sum.

inline void gemm_nn_row(const double* a, const double* b, double* c,
                        std::size_t i, std::size_t n, std::size_t p) {
  double* crow = c + i * p;
  const double* arow = a + i * n;
  constexpr std::size_t kBlock = 16;
  std::size_t j = 0;
  for (; j + kBlock <= p; j += kBlock) {
    double acc[kBlock] = {};
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = arow[k];
      const double* brow = b + k * p + j;
      for (std::size_t t = 0; t < kBlock; ++t) acc[t] += aik * brow[t];
    }
    for (std::size_t t = 0; t < kBlock; ++t) crow[j + t] = acc[t];
  }
  if (j < p) {
    double acc[kBlock] = {};
    const std::size_t w = p - j;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = arow[k];
      const double* brow = b + k * p + j;
      for (std::size_t t = 0; t < w; ++t) acc[t] += aik * brow[t];
    }
    for (std::size_t t = 0; t < w; ++t) crow[j + t] = acc[t];
  }
}

// All three products run through these two drivers so the serial and the
// OpenMP path use the identical per-row body.
inline void gemm_rows_serial(const double* a, const double* b, double* c,
                             std::size_t m, std::size_t n, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) gemm_nn_row(a, b, c, i, n, p);
}

inline void gemm_rows_parallel(const double* a, const double* b, double* c,
                               std::size_t m, std::size_t n, std::size_t p,
                               int threads) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    gemm_nn_row(a, b, c, static_cast<std::size_t>(i), n, p);
}

// gemm_nt reuses gemm_nn_row on a transposed copy of B. The dot product for
// element (i, j) then runs over the same ascending-k order the direct loop
// would use, so this is a pure layout change: results are bitwise identical,
// but both operands stream contiguously. The scratch buffer is thread_local
// because kernels are orchestrated from one thread and parallelized inside.
inline const double* transposed_copy(const double* b, std::size_t rows,
                                     std::size_t cols) {
  thread_local std::vector<double> scratch;
  scratch.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < cols; ++k) scratch[k * rows + r] = b[r * cols + k];
  return scratch.data();
}

// gemm_tn reuses gemm_nn_row on a transposed copy of A: element (i, j) of
// A^T.B accumulates over sample index r in ascending order either way, so the
// copy changes memory layout, not results.

inline void softmax_row(const double* x, double* out, std::size_t i,
                        std::size_t cols, double inv_temp) {
  const double* xrow = x + i * cols;
  double* orow = out + i * cols;
  double mx = xrow[0];
  for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xrow[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    orow[j] = std::exp((xrow[j] - mx) * inv_temp);
    sum += orow[j];
  }
  const double inv_sum = 1.0 / sum;
  for (std::size_t j = 0; j < cols; ++j) orow[j] *= inv_sum;
}

}  // namespace

void set_threads(int n) { g_threads = n < 1 ? 1 : n; }

int threads() { return g_threads; }

namespace serial {

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p) {
  gemm_rows_serial(a, b, c, m, n, p);
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p) {
  const double* bt = transposed_copy(b, p, n);
  gemm_rows_serial(a, bt, c, m, n, p);
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p) {
  const double* at = transposed_copy(a, m, n);
  gemm_rows_serial(at, b, c, n, m, p);
}

void row_softmax(const double* x, double* out,
                 std::size_t rows, std::size_t cols, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ParameterError("row_softmax: temperature must be positive and finite");
  if (cols == 0) return;
  const double inv_temp = 1.0 / temperature;
  for (std::size_t i = 0; i < rows; ++i) softmax_row(x, out, i, cols, inv_temp);
}

}  // namespace serial

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p) {
  if (g_threads == 1) {
    serial::gemm_nn(a, b, c, m, n, p);
    return;
  }
  gemm_rows_parallel(a, b, c, m, n, p, g_threads);
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p) {
  if (g_threads == 1) {
    serial::gemm_nt(a, b, c, m, n, p);
    return;
  }
  const double* bt = transposed_copy(b, p, n);
  gemm_rows_parallel(a, bt, c, m, n, p, g_threads);
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p) {
  if (g_threads == 1) {
    serial::gemm_tn(a, b, c, m, n, p);
    return;
  }
  const double* at = transposed_copy(a, m, n);
  gemm_rows_parallel(at, b, c, n, m, p, g_threads);
}

void row_softmax(const double* x, double* out,
                 std::size_t rows, std::size_t cols, double temperature) {
  if (g_threads == 1) {
    serial::row_softmax(x, out, rows, cols, temperature);
    return;
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ParameterError("row_softmax: temperature must be positive and finite");
  if (cols == 0) return;
  const double inv_temp = 1.0 / temperature;
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for num_threads(g_threads) schedule(static)
  for (std::ptrdiff_t i = 0; i < nrows; ++i)
    softmax_row(x, out, static_cast<std::size_t>(i), cols, inv_temp);
}

}  // namespace imcs::kernels
