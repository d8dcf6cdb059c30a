#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsec/error.hpp"

namespace lsec {

// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  void fill(double v);
  bool same_shape(const DenseMatrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Compressed sparse row matrix.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> indptr{0};
  std::vector<std::int32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return indices.size(); }

  // Throws ContractError when the CSR invariants do not hold.
  void validate() const;
  DenseMatrix to_dense() const;
  SparseMatrix transposed() const;
  static SparseMatrix identity(std::size_t n);
  // Keeps entries with |v| > 0 exactly; columns are sorted per row.
  static SparseMatrix from_dense(const DenseMatrix& d);
};

// A trainable tensor with its gradient and Adam moments.
struct ParamTensor {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;
  DenseMatrix adam_m;
  DenseMatrix adam_v;
  std::int64_t step_count = 0;

  ParamTensor() = default;
  ParamTensor(std::string n, DenseMatrix v);

  void zero_grad();
  std::size_t rows() const noexcept { return value.rows(); }
  std::size_t cols() const noexcept { return value.cols(); }
};

enum class Activation { Identity, ReLU, Sigmoid, LeakyReLU };

inline constexpr double kLeakySlope = 0.01;

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Throws NumericError naming `where` if any entry is NaN or infinite.
void check_finite(const DenseMatrix& m, const char* where);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// a^T * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// a * b^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

// s * d. The backward of spmm with respect to d is spmm_backward(s, g) = s^T g.
DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d);
DenseMatrix spmm_backward(const SparseMatrix& s, const DenseMatrix& grad_out);

// y = x w + broadcast(b); b is 1 x cols(w).
DenseMatrix affine(const DenseMatrix& x, const ParamTensor& w, const ParamTensor& b);
// Accumulates into w.grad and b.grad; returns the gradient with respect to x.
DenseMatrix affine_backward(const DenseMatrix& x, ParamTensor& w, ParamTensor& b,
                            const DenseMatrix& grad_out);

double activate(double x, Activation kind) noexcept;
double activate_derivative(double x, Activation kind) noexcept;
DenseMatrix activation(const DenseMatrix& x, Activation kind);
// `pre` is the activation input.
DenseMatrix activation_backward(const DenseMatrix& pre, const DenseMatrix& grad_out,
                                Activation kind);

double sigmoid(double z) noexcept;

// Mean binary cross-entropy over all entries, in the stable logits form.
double bce_with_logits(const DenseMatrix& logits, const DenseMatrix& labels);
DenseMatrix bce_with_logits_backward(const DenseMatrix& logits, const DenseMatrix& labels);

// Bias-corrected Adam over every tensor; zeroes the gradients afterwards.
void adam_step(std::span<ParamTensor* const> params, const AdamConfig& cfg);

DenseMatrix glorot_init(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace lsec
