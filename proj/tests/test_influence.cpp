#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "lsec/datagen.hpp"
#include "lsec/influence.hpp"
#include "support.hpp"

using namespace lsec;

namespace {

TripartiteGraph tiny_graph() {
  EdgeList buy, follow, sell;
  buy.edges = {{0, 0, 0}};
  follow.edges = {{0, 0, 0}};
  sell.edges = {{0, 0, 0}, {0, 1, 0}};
  return build_tripartite(1, 3, 1, buy, follow, sell);
}

std::set<std::int32_t> catalog_union(const TripartiteGraph& g, std::size_t u) {
  std::set<std::int32_t> out;
  for (auto s : g.follow.forward.neighbors(u)) {
    for (auto i : g.sell.forward.neighbors(s)) out.insert(i);
  }
  return out;
}

// Exact probability of the sampling scheme: eligible users uniformly, then
// eligible items uniformly.
double exact_probability(const TripartiteGraph& g, Setting setting) {
  double total = 0.0;
  std::size_t eligible_users = 0;
  for (std::size_t u = 0; u < g.n_users; ++u) {
    const auto inside = catalog_union(g, u);
    std::vector<std::int32_t> items;
    for (std::size_t i = 0; i < g.n_items; ++i) {
      const bool in = inside.count(static_cast<std::int32_t>(i)) > 0;
      if (in == (setting == Setting::S1)) items.push_back(static_cast<std::int32_t>(i));
    }
    if (items.empty()) continue;
    ++eligible_users;
    std::size_t hits = 0;
    for (auto i : items) hits += g.buy.has_edge(static_cast<std::int32_t>(u), i);
    total += static_cast<double>(hits) / static_cast<double>(items.size());
  }
  return total / static_cast<double>(eligible_users);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("one user, one streamer, half the catalog bought") {
  const auto g = tiny_graph();
  CHECK(exact_probability(g, Setting::S1) == 0.5);
  const auto est = purchase_probability_sim(g, Setting::S1, 10000, 11);
  CHECK(est.n_samples == 10000);
  CHECK(est.positives <= est.n_samples);
  const double sigma = std::sqrt(0.25 / 10000.0);
  CHECK(std::abs(est.probability - 0.5) < 3.0 * sigma);
  // The only S2 item is never bought.
  CHECK(purchase_probability_sim(g, Setting::S2, 1000, 1).probability == 0.0);
}

TEST_CASE("estimates agree with exact enumeration on random graphs") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto g = testing::random_tripartite(12, 15, 4, 0.3, 100 + seed);
    for (Setting s : {Setting::S1, Setting::S2}) {
      const double p = exact_probability(g, s);
      const std::uint64_t n = 40000;
      const auto est = purchase_probability_sim(g, s, n, seed);
      const double sigma = std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(n));
      CHECK(std::abs(est.probability - p) < 4.0 * sigma + 1e-12);
    }
  }
}

TEST_CASE("no buy edges gives probability zero") {
  EdgeList follow, sell;
  follow.edges = {{0, 0, 0}, {1, 1, 0}};
  sell.edges = {{0, 0, 0}, {1, 2, 0}};
  const auto g = build_tripartite(2, 4, 2, EdgeList{}, follow, sell);
  CHECK(purchase_probability_sim(g, Setting::S1, 500, 1).probability == 0.0);
  CHECK(purchase_probability_sim(g, Setting::S2, 500, 1).probability == 0.0);
}

TEST_CASE("a setting without eligible pairs is an analysis error") {
  EdgeList buy, sell;
  buy.edges = {{0, 0, 0}};
  sell.edges = {{0, 0, 0}};
  const auto g = build_tripartite(1, 1, 1, buy, EdgeList{}, sell);
  CHECK_THROWS_AS(purchase_probability_sim(g, Setting::S1, 100, 1), AnalysisError);
  // Users following nobody see the whole catalog under S2.
  const auto s2 = purchase_probability_sim(g, Setting::S2, 100, 1);
  CHECK(s2.probability == 1.0);
  CHECK(s2.users_without_follows > 0);
}

TEST_CASE("ineligible users are redrawn and counted") {
  // User 1 follows a streamer selling every item, so S2 has nothing for it.
  EdgeList buy, follow, sell;
  buy.edges = {{0, 1, 0}};
  follow.edges = {{0, 0, 0}, {1, 1, 0}};
  sell.edges = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}};
  const auto g = build_tripartite(2, 2, 2, buy, follow, sell);
  const auto est = purchase_probability_sim(g, Setting::S2, 2000, 5);
  CHECK(est.user_rejections > 0);
  CHECK(est.probability == 1.0);
}

TEST_CASE("chunked parallel estimate equals the serial reference") {
  const auto g = generate(GenConfig{});
  for (Setting s : {Setting::S1, Setting::S2}) {
    const std::uint64_t n = 3 * kMonteCarloChunk + 17;
    const auto a = purchase_probability_sim(g, s, n, 9);
    const auto b = purchase_probability_sim_serial(g, s, n, 9);
    CHECK(a.positives == b.positives);
    CHECK(a.user_rejections == b.user_rejections);
    CHECK(a.probability == b.probability);
  }
}

TEST_CASE("doubling the sample count shrinks the standard error by about sqrt 2") {
  const auto g = generate(GenConfig{});
  const std::uint64_t n = 20000;
  std::vector<double> small, large;
  for (std::uint64_t r = 0; r < 10; ++r) {
    small.push_back(purchase_probability_sim(g, Setting::S1, n, 1000 + r * 7919).probability);
    large.push_back(purchase_probability_sim(g, Setting::S1, 2 * n, 5000 + r * 7919).probability);
  }
  const double ratio = std::sqrt(variance(small) / variance(large));
  CHECK(ratio >= 1.2);
  CHECK(ratio <= 2.8);
}

TEST_CASE("set similarities") {
  const std::vector<std::int32_t> ab{0, 1}, bc{1, 2}, none{}, xyz{7, 8, 9};
  CHECK(jaccard_similarity(ab, bc) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(cosine_similarity(ab, bc) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(jaccard_similarity(ab, ab) == 1.0);
  CHECK(cosine_similarity(xyz, xyz) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(jaccard_similarity(ab, xyz) == 0.0);
  CHECK(cosine_similarity(ab, xyz) == 0.0);
  CHECK(jaccard_similarity(none, ab) == 0.0);
  CHECK(cosine_similarity(ab, none) == 0.0);
  CHECK(cosine_similarity(none, none) == 0.0);
}

TEST_CASE("similarities are symmetric and bounded") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    std::set<std::int32_t> a, b;
    const int na = static_cast<int>(rng() % 8), nb = static_cast<int>(rng() % 8);
    for (int k = 0; k < na; ++k) a.insert(static_cast<std::int32_t>(rng() % 12));
    for (int k = 0; k < nb; ++k) b.insert(static_cast<std::int32_t>(rng() % 12));
    const std::vector<std::int32_t> va(a.begin(), a.end()), vb(b.begin(), b.end());
    for (auto f : {cosine_similarity, jaccard_similarity}) {
      const double x = f(va, vb);
      CHECK(x == f(vb, va));
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
    std::size_t inter = 0;
    for (auto v : a) inter += b.count(v);
    const double uni = static_cast<double>(a.size() + b.size() - inter);
    CHECK(jaccard_similarity(va, vb) == (uni == 0 ? 0.0 : static_cast<double>(inter) / uni));
  }
}

TEST_CASE("nearest-rank quantile") {
  const std::vector<double> v{0.1, 0.2, 0.3, 0.4, 0.5};
  CHECK(nearest_rank(v, 0.5) == 0.3);
  CHECK(nearest_rank(v, 0.9) == 0.5);
  CHECK(nearest_rank(v, 0.2) == 0.1);
  CHECK(nearest_rank(v, 0.21) == 0.2);
}

TEST_CASE("cohort pairs satisfy their predicate") {
  const auto g = testing::random_tripartite(30, 25, 6, 0.2, 8);
  for (Cohort c : {Cohort::SharedStreamer, Cohort::NoSharedStreamer}) {
    const auto users = sample_cohort_pairs(g, PairMode::UserPairs, c, 50, 1);
    std::set<std::pair<int, int>> seen;
    for (const auto& p : users) {
      CHECK(p.a != p.b);
      CHECK(seen.insert({std::min(p.a, p.b), std::max(p.a, p.b)}).second);
      bool shared = false;
      for (auto s : g.follow.forward.neighbors(p.a)) shared |= g.follow.has_edge(p.b, s);
      CHECK(shared == (c == Cohort::SharedStreamer));
    }
    const auto items = sample_cohort_pairs(g, PairMode::ItemPairs, c, 50, 2);
    for (const auto& p : items) {
      bool shared = false;
      for (auto s : g.sell.reverse.neighbors(p.a)) shared |= g.sell.has_edge(s, p.b);
      CHECK(shared == (c == Cohort::SharedStreamer));
    }
  }
}

TEST_CASE("an empty cohort is an analysis error") {
  // One streamer followed by everyone: no user pair lacks a shared streamer.
  EdgeList buy, follow, sell;
  buy.edges = {{0, 0, 0}};
  follow.edges = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  sell.edges = {{0, 0, 0}};
  const auto g = build_tripartite(3, 2, 1, buy, follow, sell);
  CHECK_THROWS_AS(sample_cohort_pairs(g, PairMode::UserPairs, Cohort::NoSharedStreamer, 5, 1),
                  AnalysisError);
}

TEST_CASE("shared-streamer cohorts are more similar on influenced data") {
  const auto g = generate(GenConfig{});
  for (PairMode mode : {PairMode::UserPairs, PairMode::ItemPairs}) {
    for (Metric metric : {Metric::Jaccard, Metric::Cosine}) {
      const std::vector<double> levels{0.5, 0.9, 0.99};
      const auto shared =
          pair_similarity(g, mode, Cohort::SharedStreamer, metric, 20000, levels, 4);
      const auto apart =
          pair_similarity(g, mode, Cohort::NoSharedStreamer, metric, 20000, levels, 4);
      CHECK(shared.mean > apart.mean);
      for (const auto* q : {&shared, &apart}) {
        CHECK(std::is_sorted(q->values.begin(), q->values.end()));
        for (double v : q->values) {
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
        }
        CHECK(q->mean >= 0.0);
        CHECK(q->mean <= 1.0);
      }
    }
  }
}

TEST_CASE("report carries both probabilities and their ratio") {
  const auto g = generate(GenConfig{});
  AnalysisParams p;
  p.n_mc = 100000;
  p.similarity = false;
  const auto report = analyze(g, p);
  REQUIRE(report.probabilities.size() == 2);
  CHECK(report.ratio() == report.probabilities[0].probability / report.probabilities[1].probability);
  CHECK(report.ratio() > 3.0);
  const auto j = nlohmann::json::parse(report.to_json());
  CHECK(j.contains("ratio_s1_s2"));
  CHECK(report.to_text().find("S1") != std::string::npos);
  p.settings = {Setting::S1};
  CHECK(std::isnan(analyze(g, p).ratio()));
}
