#include "lsec/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lsec/kernels.hpp"

namespace lsec {

namespace {

std::string shape_of(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("dense matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " given " + std::to_string(values_.size()) + " values");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void DenseMatrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void SparseMatrix::validate() const {
  if (indptr.size() != rows + 1 || indptr.front() != 0) {
    throw ContractError("csr indptr has wrong length or does not start at 0");
  }
  if (static_cast<std::size_t>(indptr.back()) != indices.size() ||
      indices.size() != values.size()) {
    throw ContractError("csr indptr does not end at nnz");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (indptr[r + 1] < indptr[r]) throw ContractError("csr indptr decreases");
    for (auto e = indptr[r]; e < indptr[r + 1]; ++e) {
      if (indices[e] < 0 || static_cast<std::size_t>(indices[e]) >= cols) {
        throw ContractError("csr column index out of range in row " + std::to_string(r));
      }
      if (e > indptr[r] && indices[e] <= indices[e - 1]) {
        throw ContractError("csr columns not strictly ascending in row " + std::to_string(r));
      }
    }
  }
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto e = indptr[r]; e < indptr[r + 1]; ++e) d(r, indices[e]) += values[e];
  }
  return d;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.indptr.assign(cols + 1, 0);
  for (auto c : indices) ++t.indptr[c + 1];
  for (std::size_t c = 0; c < cols; ++c) t.indptr[c + 1] += t.indptr[c];
  t.indices.resize(indices.size());
  t.values.resize(values.size());
  std::vector<std::int64_t> cursor(t.indptr.begin(), t.indptr.end() - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto e = indptr[r]; e < indptr[r + 1]; ++e) {
      const auto pos = cursor[indices[e]]++;
      t.indices[pos] = static_cast<std::int32_t>(r);
      t.values[pos] = values[e];
    }
  }
  return t;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix s;
  s.rows = s.cols = n;
  s.indptr.resize(n + 1);
  s.indices.resize(n);
  s.values.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    s.indptr[i + 1] = static_cast<std::int64_t>(i + 1);
    s.indices[i] = static_cast<std::int32_t>(i);
  }
  return s;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& d) {
  SparseMatrix s;
  s.rows = d.rows();
  s.cols = d.cols();
  s.indptr.assign(1, 0);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) {
      if (d(r, c) != 0.0) {
        s.indices.push_back(static_cast<std::int32_t>(c));
        s.values.push_back(d(r, c));
      }
    }
    s.indptr.push_back(static_cast<std::int64_t>(s.indices.size()));
  }
  return s;
}

ParamTensor::ParamTensor(std::string n, DenseMatrix v)
    : name(std::move(n)),
      value(std::move(v)),
      grad(value.rows(), value.cols()),
      adam_m(value.rows(), value.cols()),
      adam_v(value.rows(), value.cols()) {}

void ParamTensor::zero_grad() { grad.fill(0.0); }

void check_finite(const DenseMatrix& m, const char* where) {
  for (double v : m.values()) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + where);
  }
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul " + shape_of(a) + " by " + shape_of(b));
  }
  DenseMatrix out;
  kernels::parallel::matmul(a, b, out);
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn " + shape_of(a) + " by " + shape_of(b));
  }
  DenseMatrix out;
  kernels::parallel::matmul_tn(a, b, out);
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt " + shape_of(a) + " by " + shape_of(b));
  }
  DenseMatrix out;
  kernels::parallel::matmul_nt(a, b, out);
  return out;
}

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.cols != d.rows()) {
    throw ShapeError("spmm " + std::to_string(s.rows) + "x" + std::to_string(s.cols) + " by " +
                     shape_of(d));
  }
  DenseMatrix out;
  kernels::parallel::spmm(s, d, out);
  check_finite(out, "spmm");
  return out;
}

DenseMatrix spmm_backward(const SparseMatrix& s, const DenseMatrix& grad_out) {
  if (s.rows != grad_out.rows()) {
    throw ShapeError("spmm backward: gradient " + shape_of(grad_out) + " for " +
                     std::to_string(s.rows) + " rows");
  }
  DenseMatrix out;
  kernels::parallel::spmm_transposed(s, grad_out, out);
  return out;
}

DenseMatrix affine(const DenseMatrix& x, const ParamTensor& w, const ParamTensor& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeError("affine x " + shape_of(x) + " w " + shape_of(w.value) + " b " +
                     shape_of(b.value));
  }
  DenseMatrix y = matmul(x, w.value);
  const std::size_t n = y.cols();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) y(r, c) += b.value(0, c);
  }
  check_finite(y, "affine");
  return y;
}

DenseMatrix affine_backward(const DenseMatrix& x, ParamTensor& w, ParamTensor& b,
                            const DenseMatrix& grad_out) {
  if (grad_out.rows() != x.rows() || grad_out.cols() != w.cols()) {
    throw ShapeError("affine backward gradient " + shape_of(grad_out));
  }
  const DenseMatrix gw = matmul_tn(x, grad_out);
  for (std::size_t i = 0; i < gw.size(); ++i) w.grad.values()[i] += gw.values()[i];
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    for (std::size_t c = 0; c < grad_out.cols(); ++c) b.grad(0, c) += grad_out(r, c);
  }
  return matmul_nt(grad_out, w.value);
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double activate(double x, Activation kind) noexcept {
  switch (kind) {
    case Activation::Identity: return x;
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::LeakyReLU: return x > 0.0 ? x : kLeakySlope * x;
    case Activation::Sigmoid: return sigmoid(x);
  }
  return x;
}

double activate_derivative(double x, Activation kind) noexcept {
  switch (kind) {
    case Activation::Identity: return 1.0;
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::LeakyReLU: return x > 0.0 ? 1.0 : kLeakySlope;
    case Activation::Sigmoid: {
      const double e = std::exp(-std::abs(x));
      return e / ((1.0 + e) * (1.0 + e));
    }
  }
  return 1.0;
}

DenseMatrix activation(const DenseMatrix& x, Activation kind) {
  DenseMatrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y.values()[i] = activate(x.values()[i], kind);
  return y;
}

DenseMatrix activation_backward(const DenseMatrix& pre, const DenseMatrix& grad_out,
                                Activation kind) {
  if (!pre.same_shape(grad_out)) {
    throw ShapeError("activation backward " + shape_of(pre) + " vs " + shape_of(grad_out));
  }
  DenseMatrix g(pre.rows(), pre.cols());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    g.values()[i] = grad_out.values()[i] * activate_derivative(pre.values()[i], kind);
  }
  return g;
}

namespace {

void check_labels(const DenseMatrix& logits, const DenseMatrix& labels) {
  if (!logits.same_shape(labels)) {
    throw ShapeError("bce logits " + shape_of(logits) + " vs labels " + shape_of(labels));
  }
  if (logits.size() == 0) throw ContractError("bce over an empty batch");
  for (double y : labels.values()) {
    if (y != 0.0 && y != 1.0) throw ContractError("bce label outside {0,1}");
  }
}

}  // namespace

double bce_with_logits(const DenseMatrix& logits, const DenseMatrix& labels) {
  check_labels(logits, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits.values()[i];
    const double y = labels.values()[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  const double loss = total / static_cast<double>(logits.size());
  if (!std::isfinite(loss)) throw NumericError("non-finite bce loss");
  return loss;
}

DenseMatrix bce_with_logits_backward(const DenseMatrix& logits, const DenseMatrix& labels) {
  check_labels(logits, labels);
  DenseMatrix g(logits.rows(), logits.cols());
  const double n = static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    g.values()[i] = (sigmoid(logits.values()[i]) - labels.values()[i]) / n;
  }
  return g;
}

void adam_step(std::span<ParamTensor* const> params, const AdamConfig& cfg) {
  for (ParamTensor* p : params) {
    ++p->step_count;
    const double t = static_cast<double>(p->step_count);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    double* value = p->value.data();
    double* grad = p->grad.data();
    double* m = p->adam_m.data();
    double* v = p->adam_v.data();
    const auto n = static_cast<std::int64_t>(p->value.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const double g = grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      grad[i] = 0.0;
    }
  }
}

DenseMatrix glorot_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw ArgumentError("glorot_init needs positive dimensions");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

}  // namespace lsec
