// Timing harness for the matrix kernels: serial reference vs. the
// thread-parallel path at several shapes. Usage: kernels_bench [threads]
// (default: the OpenMP processor count).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "imcs/kernels.hpp"
#include "imcs/rng.hpp"
#include "imcs/tensor.hpp"

namespace {

using imcs::Matrix;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Matrix m(r, c);
  imcs::Rng rng(seed);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.next_normal();
  return m;
}

template <typename F>
double time_best_ms(F&& fn, int reps) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

struct Shape {
  std::size_t m, n, p;
};

void bench_gemm(const Shape& s, int threads) {
  const Matrix a = random_matrix(s.m, s.n, 11);
  const Matrix b = random_matrix(s.n, s.p, 22);
  Matrix c(s.m, s.p);
  const double flops = 2.0 * static_cast<double>(s.m) * static_cast<double>(s.n) *
                       static_cast<double>(s.p);
  const int reps = 25;

  imcs::kernels::set_threads(1);
  const double serial_ms = time_best_ms(
      [&] { imcs::kernels::serial::gemm_nn(a.data(), b.data(), c.data(), s.m, s.n, s.p); },
      reps);

  imcs::kernels::set_threads(threads);
  const double par_ms = time_best_ms(
      [&] { imcs::kernels::gemm_nn(a.data(), b.data(), c.data(), s.m, s.n, s.p); },
      reps);

  std::printf("gemm_nn %4zux%4zux%4zu  serial %8.3f ms (%6.2f GFLOP/s)  "
              "parallel[%d] %8.3f ms (%6.2f GFLOP/s)  speedup %.2fx\n",
              s.m, s.n, s.p, serial_ms, flops / serial_ms / 1e6, threads, par_ms,
              flops / par_ms / 1e6, serial_ms / par_ms);
}

void bench_softmax(std::size_t rows, std::size_t cols, int threads) {
  const Matrix x = random_matrix(rows, cols, 33);
  Matrix y(rows, cols);
  const int reps = 50;

  imcs::kernels::set_threads(1);
  const double serial_ms = time_best_ms(
      [&] { imcs::kernels::serial::row_softmax(x.data(), y.data(), rows, cols, 0.1); },
      reps);

  imcs::kernels::set_threads(threads);
  const double par_ms = time_best_ms(
      [&] { imcs::kernels::row_softmax(x.data(), y.data(), rows, cols, 0.1); }, reps);

  std::printf("row_softmax %5zux%4zu     serial %8.3f ms                    "
              "parallel[%d] %8.3f ms                    speedup %.2fx\n",
              rows, cols, serial_ms, threads, par_ms, serial_ms / par_ms);
}

// The parallel path must be a pure scheduling change: identical bits out.
bool verify_bitwise(int threads) {
  const Matrix a = random_matrix(97, 53, 44);
  const Matrix b = random_matrix(53, 71, 55);
  Matrix serial_out(97, 71), parallel_out(97, 71);
  imcs::kernels::set_threads(1);
  imcs::kernels::serial::gemm_nn(a.data(), b.data(), serial_out.data(), 97, 53, 71);
  imcs::kernels::set_threads(threads);
  imcs::kernels::gemm_nn(a.data(), b.data(), parallel_out.data(), 97, 53, 71);
  bool ok = serial_out.bitwise_equal(parallel_out);

  Matrix soft_serial(97, 53), soft_parallel(97, 53);
  imcs::kernels::set_threads(1);
  imcs::kernels::serial::row_softmax(a.data(), soft_serial.data(), 97, 53, 0.1);
  imcs::kernels::set_threads(threads);
  imcs::kernels::row_softmax(a.data(), soft_parallel.data(), 97, 53, 0.1);
  return ok && soft_serial.bitwise_equal(soft_parallel);
}

}  // namespace

int main(int argc, char** argv) {
  int threads = 0;
  if (argc > 1) threads = std::atoi(argv[1]);
#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_num_procs();
#else
  if (threads <= 0) threads = 1;
#endif

  if (!verify_bitwise(threads)) {
    std::printf("serial and parallel kernels disagree bitwise; not timing them\n");
    return 1;
  }
  std::printf("serial and parallel outputs bitwise equal; kernel timings, best of several runs\n");
  bench_gemm({64, 256, 256}, threads);
  bench_gemm({256, 256, 256}, threads);
  bench_gemm({64, 32, 64}, threads);
  bench_gemm({512, 128, 512}, threads);
  bench_softmax(2048, 64, threads);
  bench_softmax(64, 4096, threads);
  return 0;
}
