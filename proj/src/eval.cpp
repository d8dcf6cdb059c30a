#include "lsec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "lsec/kernels.hpp"

namespace lsec {

std::string RankingMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["auc"] = auc;
  j["mrr"] = mrr;
  for (const auto& [k, v] : ndcg) j["ndcg@" + std::to_string(k)] = v;
  for (const auto& [k, v] : recall) j["recall@" + std::to_string(k)] = v;
  j["n_users_evaluated"] = n_users_evaluated;
  j["n_users_skipped"] = n_users_skipped;
  return j.dump(2);
}

std::vector<std::size_t> ranking_order(const UserRanking& r) {
  std::vector<std::size_t> order(r.items.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (r.scores[a] != r.scores[b]) return r.scores[a] > r.scores[b];
    return r.items[a] < r.items[b];
  });
  return order;
}

bool user_metrics(const UserRanking& r, const std::vector<int>& ks, UserMetrics& out) {
  if (r.items.size() != r.scores.size()) throw ShapeError("items and scores differ in length");
  if (r.items.empty()) return false;
  std::vector<char> pos(r.items.size());
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < r.items.size(); ++k) {
    pos[k] = std::binary_search(r.positives.begin(), r.positives.end(), r.items[k]);
    n_pos += pos[k];
  }
  const std::size_t n_neg = r.items.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return false;

  out = UserMetrics{};
  out.user = r.user;

  std::vector<double> neg_scores;
  neg_scores.reserve(n_neg);
  for (std::size_t k = 0; k < r.items.size(); ++k) {
    if (!pos[k]) neg_scores.push_back(r.scores[k]);
  }
  std::sort(neg_scores.begin(), neg_scores.end());
  double correct = 0.0;
  for (std::size_t k = 0; k < r.items.size(); ++k) {
    if (!pos[k]) continue;
    const auto lo = std::lower_bound(neg_scores.begin(), neg_scores.end(), r.scores[k]);
    const auto hi = std::upper_bound(lo, neg_scores.end(), r.scores[k]);
    correct += static_cast<double>(lo - neg_scores.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  out.auc = correct / (static_cast<double>(n_pos) * static_cast<double>(n_neg));

  const auto order = ranking_order(r);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (pos[order[rank]]) {
      out.mrr = 1.0 / static_cast<double>(rank + 1);
      break;
    }
  }
  for (int K : ks) {
    const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(K), order.size());
    double dcg = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < top; ++rank) {
      if (!pos[order[rank]]) continue;
      ++hits;
      dcg += 1.0 / std::log2(static_cast<double>(rank) + 2.0);
    }
    double ideal = 0.0;
    const std::size_t n_ideal = std::min<std::size_t>(n_pos, static_cast<std::size_t>(K));
    for (std::size_t rank = 0; rank < n_ideal; ++rank) {
      ideal += 1.0 / std::log2(static_cast<double>(rank) + 2.0);
    }
    out.ndcg[K] = dcg / ideal;
    out.recall[K] = static_cast<double>(hits) / static_cast<double>(n_pos);
  }
  return true;
}

RankingMetrics compute_metrics(const std::vector<UserRanking>& users, const std::vector<int>& ks,
                               std::vector<UserMetrics>* per_user) {
  for (int K : ks) {
    if (K < 1) throw ArgumentError("cutoff K must be positive");
  }
  std::vector<UserMetrics> rows(users.size());
  std::vector<char> ok(users.size());
  const auto n = static_cast<std::int64_t>(users.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t u = 0; u < n; ++u) {
    ok[u] = user_metrics(users[u], ks, rows[u]);
  }

  RankingMetrics m;
  for (int K : ks) {
    m.ndcg[K] = 0.0;
    m.recall[K] = 0.0;
  }
  if (per_user) per_user->clear();
  for (std::size_t u = 0; u < users.size(); ++u) {
    if (!ok[u]) {
      ++m.n_users_skipped;
      continue;
    }
    ++m.n_users_evaluated;
    m.auc += rows[u].auc;
    m.mrr += rows[u].mrr;
    for (int K : ks) {
      m.ndcg[K] += rows[u].ndcg[K];
      m.recall[K] += rows[u].recall[K];
    }
    if (per_user) per_user->push_back(rows[u]);
  }
  if (m.n_users_evaluated > 0) {
    const double inv = 1.0 / static_cast<double>(m.n_users_evaluated);
    m.auc *= inv;
    m.mrr *= inv;
    for (int K : ks) {
      m.ndcg[K] *= inv;
      m.recall[K] *= inv;
    }
  }
  return m;
}

DenseMatrix score_all(const Model& model, const std::array<DenseMatrix, 3>& unified) {
  const auto& mlp_opt = model.params().mlps[static_cast<int>(Task::Buy)];
  if (!mlp_opt) throw ConfigError("the buy task is inactive; nothing to rank");
  const TaskMlp& mlp = *mlp_opt;
  const DenseMatrix& users = unified[static_cast<int>(EntityKind::User)];
  const DenseMatrix& items = unified[static_cast<int>(EntityKind::Item)];
  const std::size_t wu = users.cols();
  const std::size_t h = mlp.w1.cols();
  if (wu + items.cols() != mlp.w1.rows()) throw ShapeError("unified widths do not match the predictor");

  // Split W1 so that W1^T [u || i] = W1_u^T u + W1_i^T i.
  DenseMatrix w_user(wu, h);
  DenseMatrix w_item(items.cols(), h);
  for (std::size_t r = 0; r < wu; ++r) {
    std::copy_n(mlp.w1.value.row(r).begin(), h, w_user.row(r).begin());
  }
  for (std::size_t r = 0; r < items.cols(); ++r) {
    std::copy_n(mlp.w1.value.row(wu + r).begin(), h, w_item.row(r).begin());
  }
  const DenseMatrix a = matmul(users, w_user);
  const DenseMatrix b = matmul(items, w_item);
  DenseMatrix out;
  kernels::parallel::pair_mlp_scores(a, b, mlp.b1.value.values(), mlp.w2.value.values(),
                                     mlp.b2.value(0, 0), out);
  return out;
}

std::vector<UserRanking> rank_items(const Model& model, const TripartiteGraph& train,
                                    const EdgeList& targets,
                                    const std::vector<const EdgeList*>& extra_masks) {
  std::vector<std::vector<std::int32_t>> positives(train.n_users);
  for (const Edge& e : targets.edges) {
    if (static_cast<std::size_t>(e.left) >= train.n_users ||
        static_cast<std::size_t>(e.right) >= train.n_items) {
      throw IndexError("evaluation edge (" + std::to_string(e.left) + ", " +
                       std::to_string(e.right) + ") is outside the training graph");
    }
    positives[e.left].push_back(e.right);
  }
  std::vector<std::vector<std::int32_t>> masks(train.n_users);
  for (const EdgeList* list : extra_masks) {
    for (const Edge& e : list->edges) {
      if (static_cast<std::size_t>(e.left) < train.n_users) masks[e.left].push_back(e.right);
    }
  }

  const auto unified = model.embed_all(train);
  const DenseMatrix scores = score_all(model, unified);

  std::vector<UserRanking> out;
  std::vector<char> masked(train.n_items);
  for (std::size_t u = 0; u < train.n_users; ++u) {
    if (positives[u].empty()) continue;
    UserRanking r;
    r.user = static_cast<std::int32_t>(u);
    std::sort(positives[u].begin(), positives[u].end());
    positives[u].erase(std::unique(positives[u].begin(), positives[u].end()), positives[u].end());
    for (auto i : train.buy.forward.neighbors(u)) masked[i] = 1;
    for (auto i : masks[u]) masked[i] = 1;
    for (auto i : positives[u]) masked[i] = 0;
    for (std::size_t i = 0; i < train.n_items; ++i) {
      if (masked[i]) continue;
      r.items.push_back(static_cast<std::int32_t>(i));
      r.scores.push_back(scores(u, i));
    }
    for (auto i : train.buy.forward.neighbors(u)) masked[i] = 0;
    for (auto i : masks[u]) masked[i] = 0;
    r.positives = std::move(positives[u]);
    out.push_back(std::move(r));
  }
  return out;
}

RankingMetrics evaluate(const Model& model, const TripartiteGraph& train, const EdgeList& targets,
                        const std::vector<const EdgeList*>& extra_masks,
                        const std::vector<int>& ks, std::vector<UserMetrics>* per_user) {
  return compute_metrics(rank_items(model, train, targets, extra_masks), ks, per_user);
}

std::string per_user_csv(const std::vector<UserMetrics>& rows, const IdDictionary* users,
                         const std::vector<int>& ks) {
  std::ostringstream out;
  out.precision(17);
  out << "user_id,auc,mrr";
  for (int K : ks) out << ",ndcg" << K;
  for (int K : ks) out << ",recall" << K;
  out << '\n';
  for (const auto& r : rows) {
    if (users) {
      out << users->decode(r.user);
    } else {
      out << r.user;
    }
    out << ',' << r.auc << ',' << r.mrr;
    for (int K : ks) out << ',' << r.ndcg.at(K);
    for (int K : ks) out << ',' << r.recall.at(K);
    out << '\n';
  }
  return out.str();
}

}  // namespace lsec
