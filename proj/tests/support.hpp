#pragma once

// Shared helpers for the test binaries: random inputs and dense oracles.

#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "lsec/graph_store.hpp"
#include "lsec/numkit.hpp"

namespace testing {

inline lsec::DenseMatrix random_dense(std::size_t r, std::size_t c, std::uint64_t seed,
                                      double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  lsec::DenseMatrix m(r, c);
  for (double& v : m.values()) v = d(rng);
  return m;
}

// Random sparse matrix with roughly `density` of the entries set.
inline lsec::SparseMatrix random_sparse(std::size_t r, std::size_t c, double density,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  lsec::DenseMatrix d(r, c);
  for (double& v : d.values()) {
    if (u(rng) < density) v = u(rng) * 2.0 - 1.0;
  }
  return lsec::SparseMatrix::from_dense(d);
}

inline lsec::DenseMatrix naive_matmul(const lsec::DenseMatrix& a, const lsec::DenseMatrix& b) {
  lsec::DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

inline lsec::DenseMatrix naive_transpose(const lsec::DenseMatrix& a) {
  lsec::DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

inline double max_abs_diff(const lsec::DenseMatrix& a, const lsec::DenseMatrix& b) {
  if (!a.same_shape(b)) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  }
  return m;
}

// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central difference of f with respect to x[i].
inline double central_diff(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double keep = x;
  x = keep + h;
  const double fp = f();
  x = keep - h;
  const double fm = f();
  x = keep;
  return (fp - fm) / (2.0 * h);
}

// Distinct random edges over left x right.
inline lsec::EdgeList random_edges(std::size_t left, std::size_t right, std::size_t n,
                                   std::uint64_t seed, bool timestamps = false) {
  std::mt19937_64 rng(seed);
  std::set<std::pair<int, int>> seen;
  lsec::EdgeList list;
  list.has_timestamps = timestamps;
  n = std::min(n, left * right);
  std::uniform_int_distribution<int> l(0, static_cast<int>(left) - 1);
  std::uniform_int_distribution<int> r(0, static_cast<int>(right) - 1);
  std::int64_t t = 0;
  while (list.edges.size() < n) {
    const int a = l(rng);
    const int b = r(rng);
    if (!seen.insert({a, b}).second) continue;
    list.edges.push_back({a, b, timestamps ? t++ : 0});
  }
  return list;
}

// Random tripartite graph where every node has at least one edge in every
// relation it belongs to.
inline lsec::TripartiteGraph random_tripartite(std::size_t nu, std::size_t ni, std::size_t ns,
                                               double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto make = [&](std::size_t L, std::size_t R) {
    lsec::EdgeList list;
    list.has_timestamps = true;
    std::int64_t t = 0;
    std::vector<char> right_hit(R, 0);
    for (std::size_t a = 0; a < L; ++a) {
      bool any = false;
      for (std::size_t b = 0; b < R; ++b) {
        if (u(rng) < density) {
          list.edges.push_back({static_cast<int>(a), static_cast<int>(b), t++});
          right_hit[b] = 1;
          any = true;
        }
      }
      if (!any) {
        const auto b = static_cast<int>(rng() % R);
        list.edges.push_back({static_cast<int>(a), b, t++});
        right_hit[b] = 1;
      }
    }
    for (std::size_t b = 0; b < R; ++b) {
      if (!right_hit[b]) {
        list.edges.push_back({static_cast<int>(rng() % L), static_cast<int>(b), t++});
      }
    }
    lsec::collapse_duplicates(list);
    return list;
  };
  const auto buy = make(nu, ni);
  const auto follow = make(nu, ns);
  const auto sell = make(ns, ni);
  return lsec::build_tripartite(nu, ni, ns, buy, follow, sell);
}

}  // namespace testing
