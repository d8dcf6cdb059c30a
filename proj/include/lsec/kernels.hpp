#pragma once

// Hot loops used by numkit, eval and influence_analysis.
//
// Every kernel exists twice: `serial` is the straightforward reference kept
// for tests and benchmarks, `parallel` is the OpenMP version used at runtime.
// Work is partitioned over output rows and each output element is reduced in
// the same order in both versions, so results are bit-identical.

#include <cstddef>
#include <span>

#include "lsec/numkit.hpp"

namespace lsec::kernels {

namespace serial {
void spmm(const SparseMatrix& s, const DenseMatrix& d, DenseMatrix& out);
void spmm_transposed(const SparseMatrix& s, const DenseMatrix& g, DenseMatrix& out);
void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out(u, i) = dot(relu(left(u) + right(i) + bias), w2) + b2
void pair_mlp_scores(const DenseMatrix& left, const DenseMatrix& right,
                     std::span<const double> bias, std::span<const double> w2, double b2,
                     DenseMatrix& out);
}  // namespace serial

namespace parallel {
void spmm(const SparseMatrix& s, const DenseMatrix& d, DenseMatrix& out);
void spmm_transposed(const SparseMatrix& s, const DenseMatrix& g, DenseMatrix& out);
void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void pair_mlp_scores(const DenseMatrix& left, const DenseMatrix& right,
                     std::span<const double> bias, std::span<const double> w2, double b2,
                     DenseMatrix& out);
}  // namespace parallel

// Caps the OpenMP worker count; <= 0 leaves the runtime default.
void set_thread_limit(int threads);
int thread_limit();

}  // namespace lsec::kernels
