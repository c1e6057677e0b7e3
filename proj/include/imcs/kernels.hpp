#pragma once

#include <cstddef>

namespace imcs::kernels {

// Thread budget for the parallel kernels below. 1 selects the serial path.
// Values < 1 are clamped to 1.
void set_threads(int n);
int threads();

// All matrices are dense row-major double arrays.
//
// The parallel kernels split work across output rows and run the exact same
// per-row routine as the serial reference, so both produce bitwise-identical
// results for any thread count.

// c = a * b        a: m x n, b: n x p, c: m x p
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p);

// c = a * b^T      a: m x n, b: p x n, c: m x p
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p);

// c = a^T * b      a: m x n, b: m x p, c: n x p
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p);

// out[i,:] = softmax(x[i,:] / temperature), computed with the row max
// subtracted before exponentiation. temperature must be > 0 and finite.
void row_softmax(const double* x, double* out,
                 std::size_t rows, std::size_t cols, double temperature);

// Serial reference implementations, kept callable for tests and benchmarks.
namespace serial {
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p);
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p);
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t p);
void row_softmax(const double* x, double* out,
                 std::size_t rows, std::size_t cols, double temperature);
}  // namespace serial

}  // namespace imcs::kernels
