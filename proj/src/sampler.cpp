#include "lsec/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lsec/rng.hpp"

namespace lsec {

void FanoutPlan::set(Relation rel, Direction dir, std::int64_t value) {
  if (value < 1) throw ArgumentError("fanout must be at least 1");
  fanout[static_cast<int>(rel)][dir == Direction::Forward ? 0 : 1] = value;
}

FanoutPlan FanoutPlan::from_quantile(const TripartiteGraph& graph, double p) {
  FanoutPlan plan;
  for (Relation rel : kAllRelations) {
    const auto& g = graph.relation(rel);
    for (Direction dir : {Direction::Forward, Direction::Reverse}) {
      plan.set(rel, dir, g.csr(dir).rows() == 0 ? 1 : degree_quantile(g, dir, p));
    }
  }
  return plan;
}

NegativeSample sample_negatives(std::span<const Edge> positives, const Csr& known,
                                std::size_t right_count, int ratio, std::uint64_t seed) {
  if (ratio < 1) throw ArgumentError("negative ratio must be at least 1");
  NegativeSample out;
  out.edges.reserve(positives.size() * static_cast<std::size_t>(ratio));
  if (right_count == 0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(right_count) - 1);
  std::vector<std::int32_t> skipped;
  for (const Edge& p : positives) {
    const auto left = static_cast<std::size_t>(p.left);
    const bool in_range = left < known.rows();
    if (in_range && static_cast<std::size_t>(known.degree(left)) >= right_count) {
      skipped.push_back(p.left);
      continue;
    }
    for (int k = 0; k < ratio; ++k) {
      std::int32_t r;
      do {
        r = pick(rng);
      } while (in_range && known.contains(left, r));
      out.edges.push_back({p.left, r, 0.0});
    }
  }
  std::sort(skipped.begin(), skipped.end());
  out.skipped_nodes =
      static_cast<std::size_t>(std::unique(skipped.begin(), skipped.end()) - skipped.begin());
  return out;
}

SparseMatrix Block::normalized(bool self_loops) const {
  const double loop = self_loops ? 1.0 : 0.0;
  SparseMatrix s;
  s.rows = dst.size();
  s.cols = src.size();
  s.indptr.assign(1, 0);
  s.indices.reserve(adjacency.nnz() + (self_loops ? dst.size() : 0));
  s.values.reserve(s.indices.capacity());
  std::vector<double> src_scale(src.size());
  for (std::size_t j = 0; j < src.size(); ++j) {
    const double d = static_cast<double>(src_degree[j]) + loop;
    src_scale[j] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double d = static_cast<double>(dst_degree[i]) + loop;
    const double scale = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
    bool self_done = !self_loops;
    for (auto j : adjacency.neighbors(i)) {
      if (!self_done && static_cast<std::size_t>(j) > i) {
        s.indices.push_back(static_cast<std::int32_t>(i));
        s.values.push_back(scale * scale);
        self_done = true;
      }
      s.indices.push_back(j);
      s.values.push_back(scale * src_scale[static_cast<std::size_t>(j)]);
    }
    if (!self_done) {
      s.indices.push_back(static_cast<std::int32_t>(i));
      s.values.push_back(scale * scale);
    }
    s.indptr.push_back(static_cast<std::int64_t>(s.indices.size()));
  }
  return s;
}

const std::vector<std::int32_t>& SeedNodes::of(EntityKind kind) const {
  switch (kind) {
    case EntityKind::User: return users;
    case EntityKind::Item: return items;
    case EntityKind::Streamer: return streamers;
  }
  return users;
}

std::vector<std::int32_t>& SeedNodes::of(EntityKind kind) {
  return const_cast<std::vector<std::int32_t>&>(std::as_const(*this).of(kind));
}

void SeedNodes::normalize() {
  for (auto* v : {&users, &items, &streamers}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
}

namespace {

// Uniform m-subset of the neighbor list without replacement (selection
// sampling), in ascending order.
void sample_neighbors(std::span<const std::int32_t> nb, std::int64_t m, std::mt19937_64& rng,
                      std::vector<std::int32_t>& out) {
  out.clear();
  const auto n = static_cast<std::int64_t>(nb.size());
  if (m >= n) {
    out.assign(nb.begin(), nb.end());
    return;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::int64_t chosen = 0;
  for (std::int64_t t = 0; t < n && chosen < m; ++t) {
    if (static_cast<double>(n - t) * unit(rng) < static_cast<double>(m - chosen)) {
      out.push_back(nb[static_cast<std::size_t>(t)]);
      ++chosen;
    }
  }
}

}  // namespace

RelationBlocks build_relation_blocks(const TripartiteGraph& graph, Relation rel,
                                     const SeedNodes& seeds, const FanoutPlan& fanout,
                                     std::size_t n_layers, std::uint64_t seed) {
  const BipartiteGraph& g = graph.relation(rel);
  const auto L = static_cast<std::int32_t>(g.left_count);
  const std::size_t n_union = g.left_count + g.right_count;
  const std::int64_t fan_left = fanout.get(rel, Direction::Forward);
  const std::int64_t fan_right = fanout.get(rel, Direction::Reverse);

  auto neighbors = [&](std::int32_t x) {
    return x < L ? g.forward.neighbors(static_cast<std::size_t>(x))
                 : g.reverse.neighbors(static_cast<std::size_t>(x - L));
  };
  auto capped = [&](std::int32_t x) {
    const auto deg = static_cast<std::int64_t>(neighbors(x).size());
    return std::min(deg, x < L ? fan_left : fan_right);
  };

  RelationBlocks rb;
  rb.relation = rel;
  rb.left_count = g.left_count;
  std::vector<std::int32_t> frontier;
  for (auto u : seeds.of(g.left_kind)) frontier.push_back(u);
  for (auto r : seeds.of(g.right_kind)) frontier.push_back(L + r);
  rb.frontiers.push_back(frontier);

  std::mt19937_64 rng(seed);
  std::vector<std::int32_t> local(n_union, -1);
  std::vector<std::int32_t> picked;
  // hops[k] is the block from frontiers[k + 1] to frontiers[k].
  std::vector<Block> hops;
  for (std::size_t hop = 0; hop < n_layers; ++hop) {
    const auto& dst = rb.frontiers.back();
    Block b;
    b.dst = dst;
    b.src = dst;
    for (std::size_t i = 0; i < b.src.size(); ++i) local[b.src[i]] = static_cast<std::int32_t>(i);
    b.adjacency.indptr.assign(1, 0);
    std::vector<std::int32_t> cols;
    for (auto x : dst) {
      const std::int64_t m = x < L ? fan_left : fan_right;
      sample_neighbors(neighbors(x), m, rng, picked);
      cols.clear();
      for (auto nb : picked) {
        const std::int32_t y = x < L ? L + nb : nb;
        if (local[y] < 0) {
          local[y] = static_cast<std::int32_t>(b.src.size());
          b.src.push_back(y);
        }
        cols.push_back(local[y]);
      }
      std::sort(cols.begin(), cols.end());
      b.adjacency.indices.insert(b.adjacency.indices.end(), cols.begin(), cols.end());
      b.adjacency.indptr.push_back(static_cast<std::int64_t>(b.adjacency.indices.size()));
    }
    for (auto y : b.src) local[y] = -1;
    b.dst_degree.reserve(b.dst.size());
    for (auto x : b.dst) b.dst_degree.push_back(capped(x));
    b.src_degree.reserve(b.src.size());
    for (auto y : b.src) b.src_degree.push_back(capped(y));
    rb.frontiers.push_back(b.src);
    hops.push_back(std::move(b));
  }
  // Message passing runs from the outermost hop inwards.
  for (auto it = hops.rbegin(); it != hops.rend(); ++it) rb.layers.push_back(std::move(*it));
  return rb;
}

std::array<std::optional<RelationBlocks>, 3> build_blocks(const TripartiteGraph& graph,
                                                          const SeedNodes& seeds,
                                                          const FanoutPlan& fanout,
                                                          std::size_t n_layers,
                                                          std::array<bool, 3> active,
                                                          std::uint64_t seed) {
  if (n_layers < 1) throw ArgumentError("block expansion needs at least one layer");
  std::array<std::optional<RelationBlocks>, 3> out;
  for (Relation rel : kAllRelations) {
    const int r = static_cast<int>(rel);
    if (!active[r]) continue;
    out[r] = build_relation_blocks(graph, rel, seeds, fanout, n_layers,
                                   derive_seed({seed, 0xb10c, static_cast<std::uint64_t>(r)}));
  }
  return out;
}

MiniBatch make_minibatch(const TripartiteGraph& graph, const BatchRequest& req) {
  MiniBatch mb;
  auto add_task = [&](Task task, std::span<const Edge> positives, const Csr& known,
                      std::size_t right_count) {
    auto& edges = mb.task_edges[static_cast<int>(task)];
    edges.reserve(positives.size() * static_cast<std::size_t>(1 + req.negative_ratio));
    for (const Edge& e : positives) edges.push_back({e.left, e.right, 1.0});
    auto neg = sample_negatives(positives, known, right_count, req.negative_ratio,
                                derive_seed({req.seed, 0x4e67, static_cast<std::uint64_t>(task)}));
    mb.skipped_negative_nodes += neg.skipped_nodes;
    edges.insert(edges.end(), neg.edges.begin(), neg.edges.end());
  };
  if (req.tasks[0]) add_task(Task::Buy, req.buy_positives, graph.buy.forward, graph.n_items);
  if (req.tasks[1]) {
    add_task(Task::Follow, req.follow_positives, graph.follow.forward, graph.n_streamers);
  }

  for (const auto& e : mb.task_edges[0]) {
    mb.seeds.users.push_back(e.left);
    mb.seeds.items.push_back(e.right);
  }
  for (const auto& e : mb.task_edges[1]) {
    mb.seeds.users.push_back(e.left);
    mb.seeds.streamers.push_back(e.right);
  }
  mb.seeds.normalize();
  for (Relation rel : kAllRelations) {
    const int r = static_cast<int>(rel);
    if (!req.relations[r]) continue;
    mb.blocks[r] = build_relation_blocks(
        graph, rel, mb.seeds, req.fanout, req.n_layers,
        derive_seed({req.seed, 0xb10c, static_cast<std::uint64_t>(r)}));
  }
  return mb;
}

}  // namespace lsec
