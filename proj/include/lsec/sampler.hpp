#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lsec/graph_store.hpp"
#include "lsec/numkit.hpp"

namespace lsec {

// Max neighbors sampled per node per layer, per relation and direction.
struct FanoutPlan {
  static constexpr std::int64_t kUnlimited = std::numeric_limits<std::int64_t>::max();

  std::array<std::array<std::int64_t, 2>, 3> fanout{{{kUnlimited, kUnlimited},
                                                     {kUnlimited, kUnlimited},
                                                     {kUnlimited, kUnlimited}}};

  std::int64_t get(Relation rel, Direction dir) const noexcept {
    return fanout[static_cast<int>(rel)][dir == Direction::Forward ? 0 : 1];
  }
  void set(Relation rel, Direction dir, std::int64_t value);

  static FanoutPlan unlimited() { return {}; }
  // degree_quantile(p) of every relation and direction; empty sides get 1.
  static FanoutPlan from_quantile(const TripartiteGraph& graph, double p);
};

struct LabeledEdge {
  std::int32_t left;
  std::int32_t right;
  double label;
};

struct NegativeSample {
  std::vector<LabeledEdge> edges;
  // Left nodes with no unobserved right-side id; they get no negatives.
  std::size_t skipped_nodes = 0;
};

// `ratio` uniform draws per positive, rejecting right ids in known.neighbors(left).
NegativeSample sample_negatives(std::span<const Edge> positives, const Csr& known,
                                std::size_t right_count, int ratio, std::uint64_t seed);

// One message-passing layer of one bipartite graph. Node ids live in the
// union space of the relation: left nodes first, then right nodes offset by
// the left count. dst nodes are a prefix of src nodes.
struct Block {
  std::vector<std::int32_t> dst;  // union-space ids, output rows
  std::vector<std::int32_t> src;  // union-space ids, input rows
  // Sampled adjacency, dst x src, unit weights, no self loops.
  Csr adjacency;
  // Neighbor counts used for normalization: min(degree, fanout) per node.
  std::vector<std::int64_t> dst_degree;
  std::vector<std::int64_t> src_degree;

  // Symmetric normalization of the sampled adjacency (plus identity when
  // self_loops); rows of zero-degree nodes are empty without self loops.
  SparseMatrix normalized(bool self_loops) const;
};

struct RelationBlocks {
  Relation relation = Relation::Buy;
  std::size_t left_count = 0;
  // frontiers[k] holds the nodes k hops from the seeds; frontiers[k] is a
  // prefix of frontiers[k+1].
  std::vector<std::vector<std::int32_t>> frontiers;
  // layers[l] maps frontiers[K - l] to frontiers[K - l - 1].
  std::vector<Block> layers;

  std::size_t n_layers() const noexcept { return layers.size(); }
  const std::vector<std::int32_t>& targets() const { return frontiers.front(); }
  const std::vector<std::int32_t>& inputs() const { return frontiers.back(); }
};

struct SeedNodes {
  std::vector<std::int32_t> users;
  std::vector<std::int32_t> items;
  std::vector<std::int32_t> streamers;

  const std::vector<std::int32_t>& of(EntityKind kind) const;
  std::vector<std::int32_t>& of(EntityKind kind);
  // Sorts and deduplicates every list.
  void normalize();
};

// K-hop expansion from the shared seed sets in one relation. K = 0 yields
// the targets only.
RelationBlocks build_relation_blocks(const TripartiteGraph& graph, Relation rel,
                                     const SeedNodes& seeds, const FanoutPlan& fanout,
                                     std::size_t n_layers, std::uint64_t seed);

// Blocks for every relation flagged in `active`; n_layers must be >= 1.
std::array<std::optional<RelationBlocks>, 3> build_blocks(const TripartiteGraph& graph,
                                                          const SeedNodes& seeds,
                                                          const FanoutPlan& fanout,
                                                          std::size_t n_layers,
                                                          std::array<bool, 3> active,
                                                          std::uint64_t seed);

// Task 0 = buy (user, item), task 1 = follow (user, streamer).
enum class Task : std::uint8_t { Buy = 0, Follow = 1 };

struct MiniBatch {
  std::array<std::vector<LabeledEdge>, 2> task_edges;
  std::array<std::optional<RelationBlocks>, 3> blocks;
  SeedNodes seeds;
  std::size_t skipped_negative_nodes = 0;
};

struct BatchRequest {
  std::span<const Edge> buy_positives;
  std::span<const Edge> follow_positives;
  std::array<bool, 3> relations{true, true, true};
  std::array<bool, 2> tasks{true, true};
  FanoutPlan fanout;
  std::size_t n_layers = 2;
  int negative_ratio = 4;
  std::uint64_t seed = 0;
};

MiniBatch make_minibatch(const TripartiteGraph& graph, const BatchRequest& request);

}  // namespace lsec
