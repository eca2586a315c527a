#pragma once

// Dense and sparse kernels used by precompute and the model.
//
// Every kernel exists twice: an OpenMP version (mew::kernels) and a plain
// serial reference (mew::kernels::serial) that the tests and the benchmark
// compare against. Each output element is produced by exactly one thread
// with a fixed summation order, so the parallel results are bit-identical
// to the serial ones for any thread count.

#include "mew/matrix.hpp"
#include "mew/sparse.hpp"

#include <span>

namespace mew::kernels {

/// C = A * B  (or C += A * B when accumulate is set)
void matmul(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate = false);
/// C += A^T * B
void matmul_tn_acc(ConstMatrixView a, ConstMatrixView b, MatrixView c);
/// C = A * B^T  (or += when accumulate is set)
void matmul_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate = false);
/// out[j] += sum_i A(i, j)
void column_sums_acc(ConstMatrixView a, std::span<double> out);
/// Y = S * X
void spmm(const SparseMatrix& s, ConstMatrixView x, MatrixView y);

namespace serial {
void matmul(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate = false);
void matmul_tn_acc(ConstMatrixView a, ConstMatrixView b, MatrixView c);
void matmul_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate = false);
void column_sums_acc(ConstMatrixView a, std::span<double> out);
void spmm(const SparseMatrix& s, ConstMatrixView x, MatrixView y);
}  // namespace serial

/// Thread count used by the parallel kernels (MEW_THREADS overrides).
int thread_count();
void set_thread_count(int n);

}  // namespace mew::kernels
