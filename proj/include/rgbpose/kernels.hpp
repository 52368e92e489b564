#pragma once

#include <cstddef>

namespace rgbpose::kern {

/// Execution policy for the numeric kernels. Serial is the reference
/// implementation; Parallel is the OpenMP variant. Both compute every
/// output element with the same per-element arithmetic order, so results
/// are bit-identical and Auto can pick either based on problem size.
enum class Exec { Serial, Parallel, Auto };

/// C[m x n] = op(A)[m x k] * op(B)[k x n], optionally accumulating into C.
/// op(A) = A^T when trans_a (A then stored as [k x m] row-major), same for B.
void gemm(bool trans_a, bool trans_b, long m, long n, long k,
          const double* a, const double* b, double* c, bool accumulate,
          Exec exec = Exec::Auto);

/// Row-wise softmax with per-row max subtraction, y[m x n].
void softmax_rows(const double* x, double* y, long m, long n,
                  Exec exec = Exec::Auto);

/// y = max(x, slope*x) elementwise.
void leaky_relu(const double* x, double* y, long count, double slope,
                Exec exec = Exec::Auto);

/// Flop threshold above which Auto switches to the parallel variant.
long parallel_gemm_threshold();

}  // namespace rgbpose::kern
