#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "lsec/datagen.hpp"
#include "lsec/influence.hpp"
#include "support.hpp"

using namespace lsec;

namespace {

TripartiteGraph timed_chain(std::size_t n, bool same_time) {
  EdgeList buy;
  buy.has_timestamps = true;
  for (std::size_t k = 0; k < n; ++k) {
    buy.edges.push_back({static_cast<int>(k), static_cast<int>(k), same_time ? 5 : static_cast<std::int64_t>(n - k)});
  }
  EdgeList follow, sell;
  for (std::size_t k = 0; k < n; ++k) {
    follow.edges.push_back({static_cast<int>(k), 0, 0});
    sell.edges.push_back({0, static_cast<int>(k), 0});
  }
  return build_tripartite(n, n, 1, buy, follow, sell);
}

std::vector<Edge> sorted_edges(const BipartiteGraph& g) { return g.edges().edges; }

}  // namespace

TEST_CASE("config validation") {
  GenConfig c;
  c.validate();
  c.influence_strength = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GenConfig{};
  c.n_items = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GenConfig{};
  c.buys_per_user = 0.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  SplitSpec s;
  s.validate();
  s.test_frac = 0.2;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = SplitSpec{0.5, 0.5, 0.0};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("same seed gives identical graphs") {
  GenConfig c;
  c.n_users = 300;
  c.n_items = 200;
  c.n_streamers = 20;
  const auto a = generate(c);
  const auto b = generate(c);
  for (Relation rel : kAllRelations) {
    CHECK(sorted_edges(a.relation(rel)) == sorted_edges(b.relation(rel)));
  }
  c.seed = 2;
  CHECK_FALSE(sorted_edges(generate(c).buy) == sorted_edges(a.buy));
}

TEST_CASE("generated graphs satisfy the graph invariants") {
  const auto g = generate(GenConfig{});
  g.validate();
  CHECK(g.n_users == 2000);
  CHECK(g.buy.has_timestamps());
  for (std::size_t u = 0; u < g.n_users; ++u) CHECK(g.follow.forward.degree(u) >= 1);
  const std::size_t cap = g.n_items / 5;
  for (std::size_t s = 0; s < g.n_streamers; ++s) {
    CHECK(g.sell.forward.degree(s) >= 1);
    CHECK(static_cast<std::size_t>(g.sell.forward.degree(s)) <= cap);
  }
  // Timestamps are distinct event counters.
  std::set<std::int64_t> ts(g.buy.timestamps.begin(), g.buy.timestamps.end());
  CHECK(ts.size() == g.buy.edge_count());
}

TEST_CASE("full influence with one streamer selling one item") {
  GenConfig c;
  c.n_users = 50;
  c.n_items = 5;  // catalog cap n_items / 5 = 1
  c.n_streamers = 1;
  c.influence_strength = 1.0;
  c.buys_per_user = 3;
  c.follows_per_user = 1;
  const auto g = generate(c);
  REQUIRE(g.sell.edge_count() == 1);
  const auto only = g.sell.forward.neighbors(0)[0];
  for (const auto& e : g.buy.edges().edges) CHECK(e.right == only);
}

TEST_CASE("purchases mostly fall inside the followed catalogs at high influence") {
  GenConfig c;
  c.n_users = 500;
  c.influence_strength = 0.8;
  const auto g = generate(c);
  std::size_t inside = 0;
  const auto edges = g.buy.edges().edges;
  for (const auto& e : edges) {
    bool hit = false;
    for (auto s : g.follow.forward.neighbors(e.left)) hit |= g.sell.has_edge(s, e.right);
    inside += hit;
  }
  CHECK(static_cast<double>(inside) / static_cast<double>(edges.size()) > 0.8);
}

TEST_CASE("zero influence makes purchases independent of follows") {
  GenConfig c;
  c.influence_strength = 0.0;
  const auto g = generate(c);
  const auto s1 = purchase_probability_sim(g, Setting::S1, 400000, 3).probability;
  const auto s2 = purchase_probability_sim(g, Setting::S2, 400000, 4).probability;
  const double ratio = s1 / s2;
  CHECK(ratio >= 0.8);
  CHECK(ratio <= 1.25);
}

TEST_CASE("split of 10 timed edges is 8/1/1") {
  const auto g = timed_chain(10, false);
  const auto s = chronological_split(g, SplitSpec{});
  CHECK(s.train.buy.edge_count() == 8);
  CHECK(s.val.edges.size() == 1);
  CHECK(s.test.edges.size() == 1);
  CHECK(s.dropped() == 0);
  // Timestamps are n - k, so edges 1 and 0 are the latest two.
  CHECK(s.val.edges[0].timestamp == 9);
  CHECK(s.test.edges[0].timestamp == 10);
  CHECK(s.train.follow.edge_count() == 10);
  CHECK(s.train.sell.edge_count() == 10);
}

TEST_CASE("ties keep input order") {
  const auto g = timed_chain(10, true);
  const auto s = chronological_split(g, SplitSpec{});
  CHECK(s.train.buy.edge_count() == 8);
  REQUIRE(s.val.edges.size() == 1);
  REQUIRE(s.test.edges.size() == 1);
  CHECK(s.val.edges[0].left == 8);
  CHECK(s.test.edges[0].left == 9);
}

TEST_CASE("missing timestamps are a contract error") {
  EdgeList buy;
  buy.edges = {{0, 0, 0}};
  const auto g = build_tripartite(1, 1, 1, buy, EdgeList{}, EdgeList{});
  CHECK_THROWS_AS(chronological_split(g, SplitSpec{}), ContractError);
}

TEST_CASE("cold-start edges are dropped") {
  // User 1 and item 9 only appear in the last edge.
  EdgeList buy;
  buy.has_timestamps = true;
  for (int k = 0; k < 9; ++k) buy.edges.push_back({0, k, k});
  buy.edges.push_back({1, 9, 9});
  const auto g = build_tripartite(2, 10, 1, buy, EdgeList{}, EdgeList{});
  const auto s = chronological_split(g, SplitSpec{});
  CHECK(s.test.edges.empty());
  CHECK(s.dropped_test == 1);
}

TEST_CASE("split properties on generated data") {
  GenConfig c;
  c.n_users = 400;
  const auto g = generate(c);
  const auto s = chronological_split(g, SplitSpec{});
  const auto train = s.train.buy.edges().edges;
  std::int64_t max_train = -1;
  for (const auto& e : train) max_train = std::max(max_train, e.timestamp);
  std::int64_t min_val = INT64_MAX, max_val = -1, min_test = INT64_MAX;
  for (const auto& e : s.val.edges) {
    min_val = std::min(min_val, e.timestamp);
    max_val = std::max(max_val, e.timestamp);
  }
  for (const auto& e : s.test.edges) min_test = std::min(min_test, e.timestamp);
  CHECK(max_train <= min_val);
  CHECK(max_val <= min_test);

  std::set<std::pair<int, int>> seen;
  for (const auto* list : {&train, &s.val.edges, &s.test.edges}) {
    for (const auto& e : *list) CHECK(seen.insert({e.left, e.right}).second);
  }
  CHECK(seen.size() + s.dropped() == g.buy.edge_count());
  const auto j = nlohmann::json::parse(split_manifest_json(s));
  CHECK(j["train_count"] == train.size());
  CHECK(j["dropped_count"] == s.dropped());
}

TEST_CASE("split directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "lsec_split_rt";
  std::filesystem::remove_all(dir);
  GenConfig c;
  c.n_users = 200;
  c.n_items = 150;
  c.n_streamers = 12;
  const auto g = generate(c);
  const auto s = chronological_split(g, SplitSpec{});
  write_split(dir, s, synthetic_dictionaries(g.n_users, g.n_items, g.n_streamers));
  const LoadedSplit back = load_split(dir);
  CHECK(back.split.train.n_users == g.n_users);
  CHECK(sorted_edges(back.split.train.buy) == sorted_edges(s.train.buy));
  auto canon = [](std::vector<Edge> v) {
    std::sort(v.begin(), v.end(), [](const Edge& a, const Edge& b) {
      return std::tie(a.left, a.right) < std::tie(b.left, b.right);
    });
    return v;
  };
  CHECK(canon(back.split.val.edges) == canon(s.val.edges));
  CHECK(canon(back.split.test.edges) == canon(s.test.edges));
  CHECK(std::filesystem::exists(dir / "split.json"));
}
