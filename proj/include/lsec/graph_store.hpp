#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lsec/error.hpp"
#include "lsec/numkit.hpp"

namespace lsec {

enum class EntityKind : std::uint8_t { User = 0, Item = 1, Streamer = 2 };

// Relation ids match the ablation labels: 0 = buy, 1 = follow, 2 = sell.
enum class Relation : std::uint8_t { Buy = 0, Follow = 1, Sell = 2 };

inline constexpr Relation kAllRelations[] = {Relation::Buy, Relation::Follow, Relation::Sell};

const char* to_string(EntityKind kind) noexcept;
const char* to_string(Relation rel) noexcept;
Relation relation_from_string(std::string_view name);
EntityKind left_kind(Relation rel) noexcept;
EntityKind right_kind(Relation rel) noexcept;
bool touches(Relation rel, EntityKind kind) noexcept;

struct EntityId {
  EntityKind kind;
  std::int32_t index;
  friend bool operator==(const EntityId&, const EntityId&) = default;
};

// Bijective map between raw string ids and dense 0-based indices.
class IdDictionary {
 public:
  std::int32_t encode(std::string_view raw);
  std::optional<std::int32_t> find(std::string_view raw) const;
  const std::string& decode(std::int32_t index) const;
  std::size_t size() const noexcept { return raw_.size(); }

  // One raw id per line, in index order.
  void save(const std::filesystem::path& path) const;
  static IdDictionary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> raw_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct Dictionaries {
  IdDictionary users;
  IdDictionary items;
  IdDictionary streamers;

  IdDictionary& of(EntityKind kind);
  const IdDictionary& of(EntityKind kind) const;
};

struct Edge {
  std::int32_t left = 0;
  std::int32_t right = 0;
  std::int64_t timestamp = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct EdgeList {
  std::vector<Edge> edges;
  bool has_timestamps = false;
};

// Reads `left<TAB>right[<TAB>timestamp]` lines. Raw ids go through `dicts`;
// duplicate pairs collapse to one edge keeping the earliest timestamp.
EdgeList load_edges(const std::filesystem::path& path, Relation schema, Dictionaries& dicts);

// Sorts by (left, right) and collapses duplicates, keeping the earliest timestamp.
void collapse_duplicates(EdgeList& list);

struct Csr {
  std::vector<std::int64_t> indptr{0};
  std::vector<std::int32_t> indices;

  std::size_t rows() const noexcept { return indptr.size() - 1; }
  std::size_t nnz() const noexcept { return indices.size(); }
  std::int64_t degree(std::size_t row) const noexcept { return indptr[row + 1] - indptr[row]; }
  std::span<const std::int32_t> neighbors(std::size_t row) const noexcept {
    return {indices.data() + indptr[row], static_cast<std::size_t>(degree(row))};
  }
  bool contains(std::size_t row, std::int32_t col) const noexcept;
};

enum class Direction { Forward, Reverse };

class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  EntityKind left_kind = EntityKind::User;
  EntityKind right_kind = EntityKind::Item;
  std::size_t left_count = 0;
  std::size_t right_count = 0;
  Csr forward;   // left -> right
  Csr reverse;   // right -> left
  // Per-edge timestamps aligned with forward.indices; empty when absent.
  std::vector<std::int64_t> timestamps;

  std::size_t edge_count() const noexcept { return forward.nnz(); }
  bool has_timestamps() const noexcept { return !timestamps.empty(); }
  bool has_edge(std::int32_t left, std::int32_t right) const noexcept {
    return forward.contains(static_cast<std::size_t>(left), right);
  }
  const Csr& csr(Direction dir) const noexcept {
    return dir == Direction::Forward ? forward : reverse;
  }
  EdgeList edges() const;

  // Throws ContractError on any broken invariant.
  void validate() const;
};

BipartiteGraph build_bipartite(const EdgeList& edges, EntityKind left_kind, EntityKind right_kind,
                               std::size_t left_count, std::size_t right_count);

struct TripartiteGraph {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_streamers = 0;
  BipartiteGraph buy;     // User -> Item
  BipartiteGraph follow;  // User -> Streamer
  BipartiteGraph sell;    // Streamer -> Item

  const BipartiteGraph& relation(Relation rel) const noexcept;
  BipartiteGraph& relation(Relation rel) noexcept;
  std::size_t count(EntityKind kind) const noexcept;
  void validate() const;
};

TripartiteGraph build_tripartite(std::size_t n_users, std::size_t n_items, std::size_t n_streamers,
                                 const EdgeList& buy, const EdgeList& follow,
                                 const EdgeList& sell);

// Nearest-rank quantile of the source-side degrees: the value at rank
// ceil(p * n) of the ascending degree list, at least 1.
std::int64_t degree_quantile(const BipartiteGraph& graph, Direction dir, double p);

// D^-1/2 (A + I?) D^-1/2 over the left+right node union; left nodes come first.
// Without self loops, rows of isolated nodes are empty.
SparseMatrix normalized_blocks(const BipartiteGraph& graph, bool self_loops);

struct Dataset {
  Dictionaries dicts;
  TripartiteGraph graph;
};

// Reads buy.tsv, follow.tsv and sell.tsv from `dir`. Dictionary files
// (users.txt, items.txt, streamers.txt) are preloaded when present so that
// indices survive a round trip.
Dataset load_dataset(const std::filesystem::path& dir);
void write_edges(const std::filesystem::path& path, const BipartiteGraph& graph,
                 const Dictionaries& dicts);
void write_edges(const std::filesystem::path& path, const EdgeList& edges, Relation schema,
                 const Dictionaries& dicts);
void write_dataset(const std::filesystem::path& dir, const Dataset& data);

// Binary snapshot: "LSECGRPH", u32 version, counts, forward CSR arrays and
// optional timestamps per relation, all little-endian.
void save_snapshot(const std::filesystem::path& path, const TripartiteGraph& graph);
TripartiteGraph load_snapshot(const std::filesystem::path& path);

// Dictionaries whose raw ids are "u<idx>", "i<idx>", "s<idx>".
Dictionaries synthetic_dictionaries(std::size_t n_users, std::size_t n_items,
                                    std::size_t n_streamers);

}  // namespace lsec
