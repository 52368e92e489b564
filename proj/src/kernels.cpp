#include "rgbpose/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rgbpose::kern {

namespace {

bool omp_available() {
#ifdef _OPENMP
  return omp_get_max_threads() > 1;
#else
  return false;
#endif
}

// One output row of the product. Accumulation over l runs in ascending
// order for every element, so the serial and parallel drivers produce
// bit-identical results.
inline void gemm_row(bool trans_a, bool trans_b, long i, long n, long k, long m,
                     const double* a, const double* b, double* c,
                     bool accumulate, double* acc) {
  std::fill(acc, acc + n, 0.0);
  for (long l = 0; l < k; ++l) {
    const double av = trans_a ? a[l * m + i] : a[i * k + l];
    if (av == 0.0) continue;
    if (trans_b) {
      for (long j = 0; j < n; ++j) acc[j] += av * b[j * k + l];
    } else {
      const double* brow = b + l * n;
      for (long j = 0; j < n; ++j) acc[j] += av * brow[j];
    }
  }
  double* crow = c + i * n;
  if (accumulate) {
    for (long j = 0; j < n; ++j) crow[j] += acc[j];
  } else {
    for (long j = 0; j < n; ++j) crow[j] = acc[j];
  }
}

inline void softmax_row(const double* xr, double* yr, long n) {
  double mx = xr[0];
  for (long j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
  double sum = 0.0;
  for (long j = 0; j < n; ++j) {
    yr[j] = std::exp(xr[j] - mx);
    sum += yr[j];
  }
  const double inv = 1.0 / sum;
  for (long j = 0; j < n; ++j) yr[j] *= inv;
}

}  // namespace

long parallel_gemm_threshold() { return 1L << 20; }

void gemm(bool trans_a, bool trans_b, long m, long n, long k,
          const double* a, const double* b, double* c, bool accumulate,
          Exec exec) {
  if (m == 0 || n == 0) return;
  bool parallel = exec == Exec::Parallel;
  if (exec == Exec::Auto)
    parallel = omp_available() && m * n * k >= parallel_gemm_threshold() && m > 1;

  if (parallel) {
#pragma omp parallel
    {
      std::vector<double> acc(static_cast<size_t>(n));
#pragma omp for schedule(static)
      for (long i = 0; i < m; ++i)
        gemm_row(trans_a, trans_b, i, n, k, m, a, b, c, accumulate, acc.data());
    }
  } else {
    std::vector<double> acc(static_cast<size_t>(n));
    for (long i = 0; i < m; ++i)
      gemm_row(trans_a, trans_b, i, n, k, m, a, b, c, accumulate, acc.data());
  }
}

void softmax_rows(const double* x, double* y, long m, long n, Exec exec) {
  if (m == 0 || n == 0) return;
  bool parallel = exec == Exec::Parallel;
  if (exec == Exec::Auto) parallel = omp_available() && m * n >= (1L << 16) && m > 1;

  if (parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < m; ++i) softmax_row(x + i * n, y + i * n, n);
  } else {
    for (long i = 0; i < m; ++i) softmax_row(x + i * n, y + i * n, n);
  }
}

void leaky_relu(const double* x, double* y, long count, double slope, Exec exec) {
  bool parallel = exec == Exec::Parallel;
  if (exec == Exec::Auto) parallel = omp_available() && count >= (1L << 18);

  if (parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < count; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  } else {
    for (long i = 0; i < count; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  }
}

}  // namespace rgbpose::kern
