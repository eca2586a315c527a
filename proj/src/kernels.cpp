#include "mew/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cassert>
#include <cstdlib>
#include <string>

namespace mew::kernels {

namespace {

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

int initial_threads() {
  if (const char* env = std::getenv("MEW_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}

int& threads() {
  static int n = initial_threads();
  return n;
}

}  // namespace

int thread_count() { return threads(); }

void set_thread_count(int n) {
  threads() = std::max(1, n);
  omp_set_num_threads(threads());
}

void matmul(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  const bool par = n * k * m >= kParallelWork;
#pragma omp parallel for schedule(static) if (par) num_threads(thread_count())
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c.row(i);
    if (!accumulate) std::fill(ci, ci + m, 0.0);
    const double* ai = a.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b.row(p);
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_tn_acc(ConstMatrixView a, ConstMatrixView b, MatrixView c) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  const bool par = n * k * m >= kParallelWork;
#pragma omp parallel for schedule(static) if (par) num_threads(thread_count())
  for (std::size_t p = 0; p < k; ++p) {
    double* cp = c.row(p);
    for (std::size_t i = 0; i < n; ++i) {
      const double aip = a(i, p);
      const double* bi = b.row(i);
      for (std::size_t j = 0; j < m; ++j) cp[j] += aip * bi[j];
    }
  }
}

void matmul_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
  const std::size_t n = a.rows, k = b.rows, m = a.cols;
  const bool par = n * k * m >= kParallelWork;
#pragma omp parallel for schedule(static) if (par) num_threads(thread_count())
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b.row(p);
      double s = accumulate ? ci[p] : 0.0;
      for (std::size_t j = 0; j < m; ++j) s += ai[j] * bp[j];
      ci[p] = s;
    }
  }
}

void column_sums_acc(ConstMatrixView a, std::span<double> out) {
  assert(out.size() == a.cols);
  const bool par = a.rows * a.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (par) num_threads(thread_count())
  for (std::size_t j = 0; j < a.cols; ++j) {
    double s = out[j];
    for (std::size_t i = 0; i < a.rows; ++i) s += a(i, j);
    out[j] = s;
  }
}

void spmm(const SparseMatrix& s, ConstMatrixView x, MatrixView y) {
  assert(x.rows == s.n && y.rows == s.n && y.cols == x.cols);
  const std::size_t f = x.cols;
  const bool par = s.nnz() * f >= kParallelWork;
#pragma omp parallel for schedule(dynamic, 64) if (par) num_threads(thread_count())
  for (std::size_t i = 0; i < s.n; ++i) {
    double* yi = y.row(i);
    std::fill(yi, yi + f, 0.0);
    for (std::size_t e = s.row_offsets[i]; e < s.row_offsets[i + 1]; ++e) {
      const double v = s.values[e];
      const double* xj = x.row(s.columns[e]);
      for (std::size_t j = 0; j < f; ++j) yi[j] += v * xj[j];
    }
  }
}

namespace serial {

void matmul(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = accumulate ? c(i, j) : 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  }
}

void matmul_tn_acc(ConstMatrixView a, ConstMatrixView b, MatrixView c) {
  for (std::size_t p = 0; p < a.cols; ++p) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = c(p, j);
      for (std::size_t i = 0; i < a.rows; ++i) s += a(i, p) * b(i, j);
      c(p, j) = s;
    }
  }
}

void matmul_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t p = 0; p < b.rows; ++p) {
      double s = accumulate ? c(i, p) : 0.0;
      for (std::size_t j = 0; j < a.cols; ++j) s += a(i, j) * b(p, j);
      c(i, p) = s;
    }
  }
}

void column_sums_acc(ConstMatrixView a, std::span<double> out) {
  for (std::size_t j = 0; j < a.cols; ++j) {
    double s = out[j];
    for (std::size_t i = 0; i < a.rows; ++i) s += a(i, j);
    out[j] = s;
  }
}

void spmm(const SparseMatrix& s, ConstMatrixView x, MatrixView y) {
  for (std::size_t i = 0; i < s.n; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) {
      double acc = 0.0;
      for (std::size_t e = s.row_offsets[i]; e < s.row_offsets[i + 1]; ++e) {
        acc += s.values[e] * x(s.columns[e], j);
      }
      y(i, j) = acc;
    }
  }
}

}  // namespace serial

}  // namespace mew::kernels
