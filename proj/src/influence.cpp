#include "lsec/influence.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace lsec {

const char* to_string(Setting s) noexcept { return s == Setting::S1 ? "S1" : "S2"; }
const char* to_string(PairMode m) noexcept {
  return m == PairMode::UserPairs ? "user_pairs" : "item_pairs";
}
const char* to_string(Cohort c) noexcept {
  return c == Cohort::SharedStreamer ? "shared_streamer" : "no_shared_streamer";
}
const char* to_string(Metric m) noexcept { return m == Metric::Cosine ? "cosine" : "jaccard"; }

Setting setting_from_string(const std::string& s) {
  if (s == "S1" || s == "s1") return Setting::S1;
  if (s == "S2" || s == "s2") return Setting::S2;
  throw ArgumentError("unknown setting '" + s + "' (expected S1 or S2)");
}

namespace {

std::size_t intersection_size(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

bool intersects(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      return true;
    }
  }
  return false;
}

// Per-user size of the union of followed streamers' catalogs.
std::vector<std::size_t> reach_sizes(const TripartiteGraph& g) {
  std::vector<std::size_t> sizes(g.n_users, 0);
  const auto n_users = static_cast<std::int64_t>(g.n_users);
#pragma omp parallel
  {
    std::vector<std::int64_t> mark(g.n_items, -1);
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t u = 0; u < n_users; ++u) {
      std::size_t n = 0;
      for (auto s : g.follow.forward.neighbors(static_cast<std::size_t>(u))) {
        for (auto i : g.sell.forward.neighbors(static_cast<std::size_t>(s))) {
          if (mark[i] != u) {
            mark[i] = u;
            ++n;
          }
        }
      }
      sizes[static_cast<std::size_t>(u)] = n;
    }
  }
  return sizes;
}

struct ChunkResult {
  std::uint64_t positives = 0;
  std::uint64_t rejections = 0;
};

class PurchaseSampler {
 public:
  PurchaseSampler(const TripartiteGraph& g, Setting setting)
      : g_(g), setting_(setting), reach_(reach_sizes(g)) {
    for (std::size_t u = 0; u < g.n_users; ++u) {
      if (eligible(u)) ++n_eligible_;
      if (g.follow.forward.degree(u) == 0) ++no_follows_;
    }
  }

  std::uint64_t eligible_users() const { return n_eligible_; }
  std::uint64_t users_without_follows() const { return no_follows_; }

  bool eligible(std::size_t u) const {
    return setting_ == Setting::S1 ? reach_[u] > 0 : reach_[u] < g_.n_items;
  }

  ChunkResult run_chunk(std::uint64_t count, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_user(0, g_.n_users - 1);
    ChunkResult r;
    for (std::uint64_t k = 0; k < count; ++k) {
      std::size_t u = pick_user(rng);
      while (!eligible(u)) {
        ++r.rejections;
        u = pick_user(rng);
      }
      const std::int32_t item = setting_ == Setting::S1 ? sample_reached(u, rng)
                                                        : sample_unreached(u, rng);
      if (g_.buy.has_edge(static_cast<std::int32_t>(u), item)) ++r.positives;
    }
    return r;
  }

 private:
  // Uniform over the union of followed catalogs: draw a (streamer, item) slot
  // uniformly, accept with probability 1 / (number of followed sellers).
  std::int32_t sample_reached(std::size_t u, std::mt19937_64& rng) const {
    const auto follows = g_.follow.forward.neighbors(u);
    std::uniform_int_distribution<std::size_t> pick_slot(0, total_slots(follows) - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (true) {
      std::size_t slot = pick_slot(rng);
      std::int32_t item = -1;
      for (auto s : follows) {
        const auto cat = g_.sell.forward.neighbors(static_cast<std::size_t>(s));
        if (slot < cat.size()) {
          item = cat[slot];
          break;
        }
        slot -= cat.size();
      }
      const auto sellers = g_.sell.reverse.neighbors(static_cast<std::size_t>(item));
      const auto mult = intersection_size(sellers, follows);
      if (mult == 1 || unit(rng) * static_cast<double>(mult) < 1.0) return item;
    }
  }

  std::int32_t sample_unreached(std::size_t u, std::mt19937_64& rng) const {
    const auto follows = g_.follow.forward.neighbors(u);
    std::uniform_int_distribution<std::int32_t> pick_item(
        0, static_cast<std::int32_t>(g_.n_items) - 1);
    while (true) {
      const auto item = pick_item(rng);
      if (!intersects(g_.sell.reverse.neighbors(static_cast<std::size_t>(item)), follows)) {
        return item;
      }
    }
  }

  std::size_t total_slots(std::span<const std::int32_t> follows) const {
    std::size_t n = 0;
    for (auto s : follows) n += static_cast<std::size_t>(g_.sell.forward.degree(s));
    return n;
  }

  const TripartiteGraph& g_;
  Setting setting_;
  std::vector<std::size_t> reach_;
  std::uint64_t n_eligible_ = 0;
  std::uint64_t no_follows_ = 0;
};

ProbEstimate finish(const PurchaseSampler& sampler, Setting setting, std::uint64_t n_mc,
                    const std::vector<ChunkResult>& chunks) {
  ProbEstimate est;
  est.setting = setting;
  est.n_samples = n_mc;
  for (const auto& c : chunks) {
    est.positives += c.positives;
    est.user_rejections += c.rejections;
  }
  est.probability = static_cast<double>(est.positives) / static_cast<double>(n_mc);
  est.users_without_follows = sampler.users_without_follows();
  return est;
}

void check_sim_args(const TripartiteGraph& graph, std::uint64_t n_mc) {
  if (n_mc == 0) throw ArgumentError("n_mc must be positive");
  if (graph.n_users == 0 || graph.n_items == 0) {
    throw AnalysisError("purchase simulation needs users and items");
  }
}

}  // namespace

ProbEstimate purchase_probability_sim_serial(const TripartiteGraph& graph, Setting setting,
                                             std::uint64_t n_mc, std::uint64_t seed) {
  check_sim_args(graph, n_mc);
  PurchaseSampler sampler(graph, setting);
  if (sampler.eligible_users() == 0) {
    throw AnalysisError(std::string("no eligible (user, item) pairs for setting ") +
                        to_string(setting));
  }
  const std::uint64_t n_chunks = (n_mc + kMonteCarloChunk - 1) / kMonteCarloChunk;
  std::vector<ChunkResult> chunks(n_chunks);
  for (std::uint64_t c = 0; c < n_chunks; ++c) {
    const auto count = std::min(kMonteCarloChunk, n_mc - c * kMonteCarloChunk);
    chunks[c] = sampler.run_chunk(count, seed + c);
  }
  return finish(sampler, setting, n_mc, chunks);
}

ProbEstimate purchase_probability_sim(const TripartiteGraph& graph, Setting setting,
                                      std::uint64_t n_mc, std::uint64_t seed) {
  check_sim_args(graph, n_mc);
  PurchaseSampler sampler(graph, setting);
  if (sampler.eligible_users() == 0) {
    throw AnalysisError(std::string("no eligible (user, item) pairs for setting ") +
                        to_string(setting));
  }
  const auto n_chunks =
      static_cast<std::int64_t>((n_mc + kMonteCarloChunk - 1) / kMonteCarloChunk);
  std::vector<ChunkResult> chunks(static_cast<std::size_t>(n_chunks));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    const auto uc = static_cast<std::uint64_t>(c);
    const auto count = std::min(kMonteCarloChunk, n_mc - uc * kMonteCarloChunk);
    chunks[uc] = sampler.run_chunk(count, seed + uc);
  }
  return finish(sampler, setting, n_mc, chunks);
}

double cosine_similarity(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  if (a.empty() || b.empty()) return 0.0;
  const auto inter = static_cast<double>(intersection_size(a, b));
  return inter / (std::sqrt(static_cast<double>(a.size())) *
                  std::sqrt(static_cast<double>(b.size())));
}

double jaccard_similarity(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  if (a.empty() || b.empty()) return 0.0;
  const auto inter = intersection_size(a, b);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double nearest_rank(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ArgumentError("quantile of an empty sample");
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::vector<EntityPair> sample_cohort_pairs(const TripartiteGraph& graph, PairMode mode,
                                            Cohort cohort, std::uint64_t n_pairs,
                                            std::uint64_t seed) {
  if (n_pairs == 0) throw ArgumentError("n_pairs must be positive");
  const bool users = mode == PairMode::UserPairs;
  const std::size_t n = users ? graph.n_users : graph.n_items;
  const Csr& link = users ? graph.follow.forward : graph.sell.reverse;
  if (n < 2) throw AnalysisError("pair sampling needs at least two entities");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(n) - 1);
  std::unordered_set<std::uint64_t> seen;
  std::vector<EntityPair> pairs;
  pairs.reserve(n_pairs);
  const std::uint64_t budget = 50 * n_pairs + 100000;
  for (std::uint64_t attempt = 0; attempt < budget && pairs.size() < n_pairs; ++attempt) {
    std::int32_t a = pick(rng);
    std::int32_t b = pick(rng);
    if (a == b) continue;
    if (b < a) std::swap(a, b);
    const bool shared = intersects(link.neighbors(a), link.neighbors(b));
    if (shared != (cohort == Cohort::SharedStreamer)) continue;
    const auto key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    if (!seen.insert(key).second) continue;
    pairs.push_back({a, b});
  }
  if (pairs.empty()) {
    throw AnalysisError(std::string("cohort ") + to_string(cohort) + " of " + to_string(mode) +
                        " is empty after " + std::to_string(budget) + " attempts");
  }
  return pairs;
}

QuantileSummary pair_similarity(const TripartiteGraph& graph, PairMode mode, Cohort cohort,
                                Metric metric, std::uint64_t n_pairs,
                                const std::vector<double>& levels, std::uint64_t seed) {
  for (double p : levels) {
    if (!(p > 0.0 && p < 1.0)) throw ArgumentError("quantile levels must lie in (0,1)");
  }
  const auto pairs = sample_cohort_pairs(graph, mode, cohort, n_pairs, seed);
  const Csr& sets = mode == PairMode::UserPairs ? graph.buy.forward : graph.buy.reverse;

  std::vector<double> scores(pairs.size());
  const auto n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) {
    const auto& p = pairs[static_cast<std::size_t>(k)];
    const auto a = sets.neighbors(p.a);
    const auto b = sets.neighbors(p.b);
    scores[static_cast<std::size_t>(k)] =
        metric == Metric::Cosine ? cosine_similarity(a, b) : jaccard_similarity(a, b);
  }

  QuantileSummary q;
  q.metric = metric;
  q.mode = mode;
  q.cohort = cohort;
  q.n_pairs = pairs.size();
  double total = 0.0;
  for (double s : scores) total += s;
  q.mean = total / static_cast<double>(scores.size());
  std::sort(scores.begin(), scores.end());
  std::vector<double> sorted_levels = levels;
  std::sort(sorted_levels.begin(), sorted_levels.end());
  q.levels = sorted_levels;
  for (double p : sorted_levels) q.values.push_back(nearest_rank(scores, p));
  return q;
}

double InfluenceReport::ratio() const {
  const ProbEstimate* s1 = nullptr;
  const ProbEstimate* s2 = nullptr;
  for (const auto& p : probabilities) (p.setting == Setting::S1 ? s1 : s2) = &p;
  if (!s1 || !s2 || s2->probability == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return s1->probability / s2->probability;
}

std::string InfluenceReport::to_json() const {
  nlohmann::ordered_json j;
  j["probabilities"] = nlohmann::ordered_json::array();
  for (const auto& p : probabilities) {
    nlohmann::ordered_json e;
    e["setting"] = to_string(p.setting);
    e["n_samples"] = p.n_samples;
    e["positives"] = p.positives;
    e["probability"] = p.probability;
    e["user_rejections"] = p.user_rejections;
    e["users_without_follows"] = p.users_without_follows;
    j["probabilities"].push_back(e);
  }
  const double r = ratio();
  j["ratio_s1_s2"] = std::isnan(r) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r);
  j["similarities"] = nlohmann::ordered_json::array();
  for (const auto& q : similarities) {
    nlohmann::ordered_json e;
    e["mode"] = to_string(q.mode);
    e["cohort"] = to_string(q.cohort);
    e["metric"] = to_string(q.metric);
    e["n_pairs"] = q.n_pairs;
    e["levels"] = q.levels;
    e["values"] = q.values;
    e["mean"] = q.mean;
    j["similarities"].push_back(e);
  }
  return j.dump(2);
}

std::string InfluenceReport::to_text() const {
  std::ostringstream out;
  if (!probabilities.empty()) {
    out << "Purchase probability (Monte Carlo)\n";
    out << std::left << std::setw(10) << "Setting" << std::setw(16) << "Probability"
        << std::setw(14) << "Samples" << "Positives\n";
    for (const auto& p : probabilities) {
      out << std::left << std::setw(10) << to_string(p.setting) << std::setw(16)
          << std::scientific << std::setprecision(3) << p.probability << std::defaultfloat
          << std::setw(14) << p.n_samples << p.positives << '\n';
    }
    const double r = ratio();
    if (!std::isnan(r)) out << "S1/S2 ratio: " << std::fixed << std::setprecision(3) << r << '\n';
    for (const auto& p : probabilities) {
      if (p.setting == Setting::S2 && p.users_without_follows > 0) {
        out << "note: " << p.users_without_follows
            << " users follow nobody and draw S2 items from the full catalog\n";
        break;
      }
    }
    out << std::defaultfloat;
  }
  for (PairMode mode : {PairMode::UserPairs, PairMode::ItemPairs}) {
    bool header = false;
    for (const auto& q : similarities) {
      if (q.mode != mode) continue;
      if (!header) {
        out << '\n'
            << (mode == PairMode::UserPairs ? "User-pair" : "Item-pair")
            << " similarity quantiles\n";
        out << std::left << std::setw(9) << "Metric" << std::setw(20) << "Cohort";
        for (double l : q.levels) {
          std::ostringstream h;
          h << "q" << l;
          out << std::setw(10) << h.str();
        }
        out << "mean\n";
        header = true;
      }
      out << std::left << std::setw(9) << to_string(q.metric) << std::setw(20)
          << to_string(q.cohort) << std::fixed << std::setprecision(4);
      for (double v : q.values) out << std::setw(10) << v;
      out << q.mean << std::defaultfloat << '\n';
    }
  }
  return out.str();
}

InfluenceReport analyze(const TripartiteGraph& graph, const AnalysisParams& params) {
  InfluenceReport report;
  const std::uint64_t n_mc =
      params.n_mc > 0 ? params.n_mc : std::max<std::uint64_t>(1, 10 * graph.buy.edge_count());
  for (Setting s : params.settings) {
    report.probabilities.push_back(purchase_probability_sim(graph, s, n_mc, params.seed));
  }
  if (params.similarity) {
    for (PairMode mode : {PairMode::UserPairs, PairMode::ItemPairs}) {
      const auto& levels = mode == PairMode::UserPairs ? params.user_levels : params.item_levels;
      for (Metric metric : {Metric::Cosine, Metric::Jaccard}) {
        for (Cohort cohort : {Cohort::SharedStreamer, Cohort::NoSharedStreamer}) {
          report.similarities.push_back(
              pair_similarity(graph, mode, cohort, metric, params.n_pairs, levels, params.seed));
        }
      }
    }
  }
  return report;
}

}  // namespace lsec
