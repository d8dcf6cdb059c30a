#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsec/graph_store.hpp"

namespace lsec {

// S1: items sold by a streamer the user follows. S2: items outside that set.
enum class Setting { S1, S2 };
enum class PairMode { UserPairs, ItemPairs };
enum class Cohort { SharedStreamer, NoSharedStreamer };
enum class Metric { Cosine, Jaccard };

const char* to_string(Setting s) noexcept;
const char* to_string(PairMode m) noexcept;
const char* to_string(Cohort c) noexcept;
const char* to_string(Metric m) noexcept;
Setting setting_from_string(const std::string& s);

struct ProbEstimate {
  Setting setting = Setting::S1;
  std::uint64_t n_samples = 0;
  std::uint64_t positives = 0;
  double probability = 0.0;
  // Users drawn but ineligible for the setting, then redrawn.
  std::uint64_t user_rejections = 0;
  // Users following nobody; they are eligible for S2 with the full catalog.
  std::uint64_t users_without_follows = 0;
};

// Monte Carlo samples are drawn in fixed-size chunks; chunk c uses the RNG
// seeded with seed + c, so any thread count yields the same estimate.
inline constexpr std::uint64_t kMonteCarloChunk = 1u << 16;

ProbEstimate purchase_probability_sim(const TripartiteGraph& graph, Setting setting,
                                      std::uint64_t n_mc, std::uint64_t seed);

// The serial reference of the chunked estimator above.
ProbEstimate purchase_probability_sim_serial(const TripartiteGraph& graph, Setting setting,
                                             std::uint64_t n_mc, std::uint64_t seed);

struct QuantileSummary {
  std::vector<double> levels;
  std::vector<double> values;
  double mean = 0.0;
  std::uint64_t n_pairs = 0;
  Metric metric = Metric::Jaccard;
  PairMode mode = PairMode::UserPairs;
  Cohort cohort = Cohort::SharedStreamer;
};

// Binary-vector cosine and Jaccard over sorted id sets. Empty sets score 0.
double cosine_similarity(std::span<const std::int32_t> a, std::span<const std::int32_t> b);
double jaccard_similarity(std::span<const std::int32_t> a, std::span<const std::int32_t> b);

// Nearest-rank quantile: the value at rank ceil(p * n) of the ascending data.
double nearest_rank(const std::vector<double>& sorted, double p);

struct EntityPair {
  std::int32_t a;
  std::int32_t b;
};

// Rejection-samples up to n_pairs distinct unordered pairs in the cohort.
// Throws AnalysisError when none is found within the attempt budget.
std::vector<EntityPair> sample_cohort_pairs(const TripartiteGraph& graph, PairMode mode,
                                            Cohort cohort, std::uint64_t n_pairs,
                                            std::uint64_t seed);

QuantileSummary pair_similarity(const TripartiteGraph& graph, PairMode mode, Cohort cohort,
                                Metric metric, std::uint64_t n_pairs,
                                const std::vector<double>& levels, std::uint64_t seed);

struct AnalysisParams {
  std::vector<Setting> settings{Setting::S1, Setting::S2};
  // 0 selects 10 x the number of buy edges.
  std::uint64_t n_mc = 0;
  std::uint64_t n_pairs = 100000;
  std::vector<double> user_levels{0.5, 0.75, 0.9, 0.99};
  std::vector<double> item_levels{0.98, 0.99, 0.999, 0.9999};
  std::uint64_t seed = 1;
  bool similarity = true;
};

struct InfluenceReport {
  std::vector<ProbEstimate> probabilities;
  std::vector<QuantileSummary> similarities;

  // Prob(S1) / Prob(S2); NaN unless both settings ran and S2 is nonzero.
  double ratio() const;
  std::string to_json() const;
  std::string to_text() const;
};

InfluenceReport analyze(const TripartiteGraph& graph, const AnalysisParams& params);

}  // namespace lsec
