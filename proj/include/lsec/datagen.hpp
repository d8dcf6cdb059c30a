#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lsec/graph_store.hpp"

namespace lsec {

// Synthetic tripartite data with a tunable streamer influence.
struct GenConfig {
  std::size_t n_users = 2000;
  std::size_t n_items = 1000;
  std::size_t n_streamers = 100;
  // Probability that a purchase is drawn from the followed streamers' catalogs.
  double influence_strength = 0.8;
  double buys_per_user = 15.0;
  double follows_per_user = 8.0;
  // Pareto tail index of streamer catalog sizes.
  double catalog_exponent = 1.5;
  std::uint64_t seed = 1;

  void validate() const;
};

// Streamer catalog sizes are Pareto(kMinCatalog, catalog_exponent), capped at
// a fifth of the item count. Item and streamer popularity follow a Zipf law
// with these exponents over a random permutation of ids.
inline constexpr double kMinCatalog = 10.0;
inline constexpr double kItemZipf = 0.8;
inline constexpr double kStreamerZipf = 0.8;

// Buy edges carry the global purchase-event counter as timestamp.
TripartiteGraph generate(const GenConfig& config);

struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;

  void validate() const;
};

struct SplitResult {
  TripartiteGraph train;
  EdgeList val;
  EdgeList test;
  std::size_t dropped_val = 0;
  std::size_t dropped_test = 0;

  std::size_t dropped() const noexcept { return dropped_val + dropped_test; }
};

// Global chronological split of the buy edges (ties keep input order). Follow
// and sell edges stay in the training graph. Validation/test edges whose user
// or item has no edge in the training graph are dropped.
SplitResult chronological_split(const TripartiteGraph& graph, const SplitSpec& spec);

// {"train_count", "val_count", "test_count", "dropped_count"}
std::string split_manifest_json(const SplitResult& split);

// Writes train/{buy,follow,sell}.tsv plus id dictionaries, val.tsv, test.tsv
// and split.json under `dir`.
void write_split(const std::filesystem::path& dir, const SplitResult& split,
                 const Dictionaries& dicts);

struct LoadedSplit {
  Dictionaries dicts;
  SplitResult split;
};

// Reads a directory written by write_split.
LoadedSplit load_split(const std::filesystem::path& dir);

}  // namespace lsec
