#include "lsec/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lsec::kernels {

namespace {

void require_out(DenseMatrix& out, std::size_t rows, std::size_t cols) {
  if (out.rows() != rows || out.cols() != cols) {
    out = DenseMatrix(rows, cols);
  } else {
    out.fill(0.0);
  }
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

inline double pair_score(const double* l, const double* r, const double* bias, const double* w2,
                         double b2, std::size_t h) {
  // Four independent partial sums, combined in a fixed order.
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t k = 0;
  for (; k + 4 <= h; k += 4) {
    for (std::size_t q = 0; q < 4; ++q) {
      const double z = l[k + q] + r[k + q] + bias[k + q];
      acc[q] += (z > 0.0 ? z : 0.0) * w2[k + q];
    }
  }
  for (; k < h; ++k) {
    const double z = l[k] + r[k] + bias[k];
    acc[0] += (z > 0.0 ? z : 0.0) * w2[k];
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + b2;
}

}  // namespace

namespace serial {

void spmm(const SparseMatrix& s, const DenseMatrix& d, DenseMatrix& out) {
  require_out(out, s.rows, d.cols());
  const std::size_t n = d.cols();
  for (std::size_t r = 0; r < s.rows; ++r) {
    double* y = out.data() + r * n;
    for (auto e = s.indptr[r]; e < s.indptr[r + 1]; ++e) {
      axpy(s.values[e], d.data() + static_cast<std::size_t>(s.indices[e]) * n, y, n);
    }
  }
}

void spmm_transposed(const SparseMatrix& s, const DenseMatrix& g, DenseMatrix& out) {
  require_out(out, s.cols, g.cols());
  const std::size_t n = g.cols();
  for (std::size_t r = 0; r < s.rows; ++r) {
    const double* x = g.data() + r * n;
    for (auto e = s.indptr[r]; e < s.indptr[r + 1]; ++e) {
      axpy(s.values[e], x, out.data() + static_cast<std::size_t>(s.indices[e]) * n, n);
    }
  }
}

void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  require_out(out, a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* y = out.data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) axpy(a(i, k), b.data() + k * n, y, n);
  }
}

void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  require_out(out, a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t p = 0; p < a.cols(); ++p) {
      axpy(a(i, p), b.data() + i * n, out.data() + p * n, n);
    }
  }
}

void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  require_out(out, a.rows(), b.rows());
  const DenseMatrix bt = transpose(b);
  const std::size_t n = bt.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* y = out.data() + i * n;
    for (std::size_t t = 0; t < a.cols(); ++t) axpy(a(i, t), bt.data() + t * n, y, n);
  }
}

void pair_mlp_scores(const DenseMatrix& left, const DenseMatrix& right,
                     std::span<const double> bias, std::span<const double> w2, double b2,
                     DenseMatrix& out) {
  require_out(out, left.rows(), right.rows());
  const std::size_t h = left.cols();
  for (std::size_t u = 0; u < left.rows(); ++u) {
    for (std::size_t i = 0; i < right.rows(); ++i) {
      out(u, i) = pair_score(left.data() + u * h, right.data() + i * h, bias.data(), w2.data(),
                             b2, h);
    }
  }
}

}  // namespace serial

namespace parallel {

void spmm(const SparseMatrix& s, const DenseMatrix& d, DenseMatrix& out) {
  require_out(out, s.rows, d.cols());
  const std::size_t n = d.cols();
  const auto rows = static_cast<std::int64_t>(s.rows);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t r = 0; r < rows; ++r) {
    double* y = out.data() + r * n;
    for (auto e = s.indptr[r]; e < s.indptr[r + 1]; ++e) {
      axpy(s.values[e], d.data() + static_cast<std::size_t>(s.indices[e]) * n, y, n);
    }
  }
}

void spmm_transposed(const SparseMatrix& s, const DenseMatrix& g, DenseMatrix& out) {
  // The transpose lists each column's entries by ascending source row, which
  // is the accumulation order of the serial scatter.
  spmm(s.transposed(), g, out);
}

void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  require_out(out, a.rows(), b.cols());
  const std::size_t n = b.cols();
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    double* y = out.data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) axpy(a(i, k), b.data() + k * n, y, n);
  }
}

void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  require_out(out, a.cols(), b.cols());
  const std::size_t n = b.cols();
  const auto cols = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < cols; ++p) {
    double* y = out.data() + p * n;
    for (std::size_t i = 0; i < a.rows(); ++i) axpy(a(i, p), b.data() + i * n, y, n);
  }
}

void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  require_out(out, a.rows(), b.rows());
  const DenseMatrix bt = transpose(b);
  const std::size_t n = bt.cols();
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    double* y = out.data() + i * n;
    for (std::size_t t = 0; t < a.cols(); ++t) {
      axpy(a(static_cast<std::size_t>(i), t), bt.data() + t * n, y, n);
    }
  }
}

void pair_mlp_scores(const DenseMatrix& left, const DenseMatrix& right,
                     std::span<const double> bias, std::span<const double> w2, double b2,
                     DenseMatrix& out) {
  require_out(out, left.rows(), right.rows());
  const std::size_t h = left.cols();
  const auto rows = static_cast<std::int64_t>(left.rows());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t u = 0; u < rows; ++u) {
    for (std::size_t i = 0; i < right.rows(); ++i) {
      out(u, i) = pair_score(left.data() + u * h, right.data() + i * h, bias.data(), w2.data(),
                             b2, h);
    }
  }
}

}  // namespace parallel

void set_thread_limit(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int thread_limit() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace lsec::kernels
