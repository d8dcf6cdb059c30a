#include "lsec/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

namespace lsec {

void GenConfig::validate() const {
  if (n_users == 0 || n_items == 0 || n_streamers == 0) {
    throw ConfigError("generator counts must be positive");
  }
  if (!(influence_strength >= 0.0 && influence_strength <= 1.0)) {
    throw ConfigError("influence_strength must lie in [0,1]");
  }
  if (!(buys_per_user >= 1.0) || !(follows_per_user >= 1.0)) {
    throw ConfigError("buys_per_user and follows_per_user must be >= 1");
  }
  if (!(catalog_exponent > 0.0)) throw ConfigError("catalog_exponent must be positive");
}

void SplitSpec::validate() const {
  if (!(train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0)) {
    throw ConfigError("split fractions must be positive");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

namespace {

std::vector<double> zipf_weights(std::size_t n, double exponent, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> w(n);
  for (std::size_t r = 0; r < n; ++r) {
    w[perm[r]] = std::pow(static_cast<double>(r + 1), -exponent);
  }
  return w;
}

// Uniform k-subset of [0, n), ascending.
std::vector<std::int32_t> uniform_subset(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::int32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

// Weighted k-subset without replacement (exponential-key method), ascending.
std::vector<std::int32_t> weighted_subset(const std::vector<double>& w, std::size_t k,
                                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, std::int32_t>> keys(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double u = unit(rng);
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    keys[i] = {std::log(u) / w[i], static_cast<std::int32_t>(i)};
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<std::int32_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = keys[i].second;
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TripartiteGraph generate(const GenConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto item_pop = zipf_weights(config.n_items, kItemZipf, rng);
  const auto streamer_pop = zipf_weights(config.n_streamers, kStreamerZipf, rng);

  // Catalogs.
  const std::size_t cap = std::max<std::size_t>(1, config.n_items / 5);
  std::vector<std::vector<std::int32_t>> catalog(config.n_streamers);
  EdgeList sell;
  for (std::size_t s = 0; s < config.n_streamers; ++s) {
    const double u = 1.0 - unit(rng);  // (0, 1]
    const double x = kMinCatalog * std::pow(u, -1.0 / config.catalog_exponent);
    const auto size = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::min(x, static_cast<double>(cap))), 1, cap);
    catalog[s] = uniform_subset(config.n_items, size, rng);
    for (auto i : catalog[s]) sell.edges.push_back({static_cast<std::int32_t>(s), i, 0});
  }

  // Follows and per-user catalog unions.
  std::poisson_distribution<int> follow_count(config.follows_per_user);
  EdgeList follow;
  std::vector<std::vector<std::int32_t>> reach(config.n_users);
  for (std::size_t u = 0; u < config.n_users; ++u) {
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(follow_count(rng)), 1,
                                           config.n_streamers);
    for (auto s : weighted_subset(streamer_pop, k, rng)) {
      follow.edges.push_back({static_cast<std::int32_t>(u), s, 0});
      reach[u].insert(reach[u].end(), catalog[s].begin(), catalog[s].end());
    }
    std::sort(reach[u].begin(), reach[u].end());
    reach[u].erase(std::unique(reach[u].begin(), reach[u].end()), reach[u].end());
  }

  // Purchase events interleaved across users.
  std::poisson_distribution<int> buy_count(config.buys_per_user);
  std::vector<std::int32_t> slots;
  for (std::size_t u = 0; u < config.n_users; ++u) {
    const int c = std::max(1, buy_count(rng));
    slots.insert(slots.end(), static_cast<std::size_t>(c), static_cast<std::int32_t>(u));
  }
  std::shuffle(slots.begin(), slots.end(), rng);

  std::discrete_distribution<std::int32_t> popular(item_pop.begin(), item_pop.end());
  std::vector<std::vector<std::int32_t>> bought(config.n_users);
  EdgeList buy;
  buy.has_timestamps = true;
  std::int64_t clock = 0;
  constexpr int kRetries = 10;
  for (auto u : slots) {
    const std::int64_t t = clock++;
    auto& mine = bought[static_cast<std::size_t>(u)];
    const auto& pool = reach[static_cast<std::size_t>(u)];
    for (int attempt = 0; attempt < kRetries; ++attempt) {
      std::int32_t item;
      if (unit(rng) < config.influence_strength) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        item = pool[pick(rng)];
      } else {
        item = popular(rng);
      }
      if (std::find(mine.begin(), mine.end(), item) == mine.end()) {
        mine.push_back(item);
        buy.edges.push_back({u, item, t});
        break;
      }
    }
  }

  return build_tripartite(config.n_users, config.n_items, config.n_streamers, buy, follow, sell);
}

SplitResult chronological_split(const TripartiteGraph& graph, const SplitSpec& spec) {
  spec.validate();
  if (!graph.buy.has_timestamps() && graph.buy.edge_count() > 0) {
    throw ContractError("chronological split needs timestamped buy edges");
  }
  EdgeList all = graph.buy.edges();
  std::stable_sort(all.edges.begin(), all.edges.end(),
                   [](const Edge& a, const Edge& b) { return a.timestamp < b.timestamp; });

  const std::size_t n = all.edges.size();
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_frac * n + 1e-9));
  const auto n_val =
      std::min(n - n_train, static_cast<std::size_t>(std::floor(spec.val_frac * n + 1e-9)));

  EdgeList train_buy;
  train_buy.has_timestamps = true;
  train_buy.edges.assign(all.edges.begin(), all.edges.begin() + n_train);

  SplitResult out;
  out.train = graph;
  out.train.buy = build_bipartite(train_buy, EntityKind::User, EntityKind::Item, graph.n_users,
                                  graph.n_items);

  const auto& t = out.train;
  auto present = [&](const Edge& e) {
    const bool user = t.buy.forward.degree(e.left) > 0 || t.follow.forward.degree(e.left) > 0;
    const bool item = t.buy.reverse.degree(e.right) > 0 || t.sell.reverse.degree(e.right) > 0;
    return user && item;
  };
  out.val.has_timestamps = out.test.has_timestamps = true;
  for (std::size_t k = n_train; k < n; ++k) {
    const Edge& e = all.edges[k];
    const bool is_val = k < n_train + n_val;
    if (!present(e)) {
      ++(is_val ? out.dropped_val : out.dropped_test);
      continue;
    }
    (is_val ? out.val : out.test).edges.push_back(e);
  }
  return out;
}

std::string split_manifest_json(const SplitResult& split) {
  nlohmann::ordered_json j;
  j["train_count"] = split.train.buy.edge_count();
  j["val_count"] = split.val.edges.size();
  j["test_count"] = split.test.edges.size();
  j["dropped_count"] = split.dropped();
  return j.dump(2);
}

void write_split(const std::filesystem::path& dir, const SplitResult& split,
                 const Dictionaries& dicts) {
  std::filesystem::create_directories(dir);
  write_dataset(dir / "train", Dataset{dicts, split.train});
  write_edges(dir / "val.tsv", split.val, Relation::Buy, dicts);
  write_edges(dir / "test.tsv", split.test, Relation::Buy, dicts);
  std::ofstream(dir / "split.json") << split_manifest_json(split) << '\n';
}

LoadedSplit load_split(const std::filesystem::path& dir) {
  Dataset train = load_dataset(dir / "train");
  LoadedSplit out;
  out.split.train = std::move(train.graph);
  out.dicts = std::move(train.dicts);
  const std::size_t n_users = out.dicts.users.size();
  const std::size_t n_items = out.dicts.items.size();
  for (const char* name : {"val.tsv", "test.tsv"}) {
    EdgeList list = load_edges(dir / name, Relation::Buy, out.dicts);
    if (out.dicts.users.size() != n_users || out.dicts.items.size() != n_items) {
      throw ContractError(std::string(name) + " mentions ids absent from the training graph");
    }
    (std::string(name) == "val.tsv" ? out.split.val : out.split.test) = std::move(list);
  }
  return out;
}

}  // namespace lsec
