#pragma once

// Dense reference computations for the encoder and a finite-difference
// gradient check over a whole model.

#include <cmath>
#include <numeric>

#include "lsec/model.hpp"
#include "support.hpp"

namespace testing {

// Union-space adjacency (left nodes first) of one relation.
inline lsec::DenseMatrix dense_adjacency(const lsec::BipartiteGraph& g) {
  const std::size_t L = g.left_count;
  const std::size_t n = L + g.right_count;
  lsec::DenseMatrix a(n, n);
  for (std::size_t l = 0; l < L; ++l) {
    for (auto r : g.forward.neighbors(l)) {
      a(l, L + static_cast<std::size_t>(r)) = 1.0;
      a(L + static_cast<std::size_t>(r), l) = 1.0;
    }
  }
  return a;
}

// D^-1/2 (A [+ I]) D^-1/2 with zero rows for zero degrees.
inline lsec::DenseMatrix dense_normalized(lsec::DenseMatrix a, bool self_loops) {
  const std::size_t n = a.rows();
  if (self_loops) {
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
  }
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d[i] += a(i, j);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (a(i, j) != 0.0) a(i, j) /= std::sqrt(d[i] * d[j]);
    }
  }
  return a;
}

// Stacked [left table; right table] rows of one relation.
inline lsec::DenseMatrix stacked_embeddings(const lsec::Model& m, lsec::Relation rel) {
  const auto& lt = m.params().embeddings[static_cast<int>(lsec::left_kind(rel))].value;
  const auto& rt = m.params().embeddings[static_cast<int>(lsec::right_kind(rel))].value;
  lsec::DenseMatrix h(lt.rows() + rt.rows(), lt.cols());
  std::copy(lt.values().begin(), lt.values().end(), h.values().begin());
  std::copy(rt.values().begin(), rt.values().end(),
            h.values().begin() + static_cast<std::ptrdiff_t>(lt.size()));
  return h;
}

// Whole-graph encoder output for every union node, computed densely.
inline lsec::DenseMatrix dense_encoder(const lsec::Model& m, const lsec::TripartiteGraph& g,
                                       lsec::Relation rel) {
  const auto& cfg = m.config();
  lsec::DenseMatrix h = stacked_embeddings(m, rel);
  if (cfg.aggregator == lsec::Aggregator::None) return h;
  const lsec::DenseMatrix a = dense_adjacency(g.relation(rel));
  if (cfg.aggregator == lsec::Aggregator::GCN) {
    const lsec::DenseMatrix n = dense_normalized(a, true);
    for (std::size_t l = 0; l < cfg.n_layers(); ++l) {
      h = naive_matmul(naive_matmul(n, h), m.params().weights[static_cast<int>(rel)][l].value);
      for (double& v : h.values()) v = v > 0.0 ? v : lsec::kLeakySlope * v;
    }
    return h;
  }
  const lsec::DenseMatrix n = dense_normalized(a, false);
  lsec::DenseMatrix mean = h;
  for (std::size_t l = 0; l < cfg.n_layers(); ++l) {
    h = naive_matmul(n, h);
    for (std::size_t i = 0; i < h.size(); ++i) mean.values()[i] += h.values()[i];
  }
  for (double& v : mean.values()) v /= static_cast<double>(cfg.n_layers() + 1);
  return naive_matmul(mean, m.params().projection->value);
}

// Target rows of a full-block encoding follow the union order.
inline lsec::DenseMatrix encode_full(const lsec::Model& m, const lsec::TripartiteGraph& g,
                                     lsec::Relation rel) {
  const std::size_t K =
      m.config().aggregator == lsec::Aggregator::None ? 0 : m.config().n_layers();
  return m.encode_bipartite(rel, lsec::full_relation_blocks(g, rel, K));
}

inline double batch_loss(const lsec::Model& m, const lsec::MiniBatch& b) {
  const auto st = m.forward(b);
  std::array<std::optional<lsec::DenseMatrix>, 2> logits;
  for (int t = 0; t < 2; ++t) {
    if (st.tasks[t]) logits[t] = st.tasks[t]->logits;
  }
  return lsec::compute_loss(logits, b.task_edges, m.config().alpha).total;
}

struct GradCheck {
  double max_rel = 0.0;
  std::size_t coords = 0;
  std::string worst;
};

// Compares backward() against central differences on every coordinate of
// every parameter tensor. Relative error uses max(|a|, |b|, floor).
inline GradCheck model_gradcheck(lsec::Model& m, const lsec::MiniBatch& b, double h = 1e-5,
                                 double floor = 1e-6) {
  m.params().zero_grad();
  const auto st = m.forward(b);
  std::array<std::optional<lsec::DenseMatrix>, 2> logits;
  for (int t = 0; t < 2; ++t) {
    if (st.tasks[t]) logits[t] = st.tasks[t]->logits;
  }
  const auto loss = lsec::compute_loss(logits, b.task_edges, m.config().alpha);
  m.backward(b, st, loss.grad_logits);

  GradCheck out;
  for (lsec::ParamTensor* p : m.params().all()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double fd = central_diff([&] { return batch_loss(m, b); }, p->value.values()[i], h);
      const double an = p->grad.values()[i];
      const double e = rel_err(an, fd, floor);
      ++out.coords;
      if (e > out.max_rel) {
        out.max_rel = e;
        out.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

// A batch over all buy and follow edges with complete neighborhoods.
inline lsec::MiniBatch full_fanout_batch(const lsec::TripartiteGraph& g,
                                         const lsec::ModelConfig& cfg, std::uint64_t seed) {
  static thread_local std::vector<lsec::Edge> buys, follows;
  buys = g.buy.edges().edges;
  follows = g.follow.edges().edges;
  lsec::BatchRequest req;
  req.buy_positives = buys;
  req.follow_positives = follows;
  req.relations = cfg.relations;
  req.tasks = cfg.tasks;
  req.fanout = lsec::FanoutPlan::unlimited();
  req.n_layers = cfg.aggregator == lsec::Aggregator::None ? 0 : cfg.n_layers();
  req.negative_ratio = cfg.negative_ratio;
  req.seed = seed;
  return lsec::make_minibatch(g, req);
}

}  // namespace testing
