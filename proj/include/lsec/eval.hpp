#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lsec/graph_store.hpp"
#include "lsec/model.hpp"

namespace lsec {

struct RankingMetrics {
  double auc = 0.0;
  double mrr = 0.0;
  std::map<int, double> ndcg;
  std::map<int, double> recall;
  std::size_t n_users_evaluated = 0;
  // Users with no candidate, no surviving positive or no negative candidate.
  std::size_t n_users_skipped = 0;

  std::string to_json() const;
};

inline const std::vector<int> kDefaultKs{10, 50};

// One user's scored candidates and the positives among them.
struct UserRanking {
  std::int32_t user = 0;
  std::vector<std::int32_t> items;
  std::vector<double> scores;
  std::vector<std::int32_t> positives;  // sorted
};

struct UserMetrics {
  std::int32_t user = 0;
  double auc = 0.0;
  double mrr = 0.0;
  std::map<int, double> ndcg;
  std::map<int, double> recall;
};

// Candidates ordered by descending score, ties by ascending item id.
std::vector<std::size_t> ranking_order(const UserRanking& r);

// False when the user cannot be evaluated.
bool user_metrics(const UserRanking& r, const std::vector<int>& ks, UserMetrics& out);

// Macro average over users. Per-user work may run in parallel; the sums are
// reduced in user order.
RankingMetrics compute_metrics(const std::vector<UserRanking>& users,
                               const std::vector<int>& ks = kDefaultKs,
                               std::vector<UserMetrics>* per_user = nullptr);

// Buy-task logits of every (user, item) pair, users x items.
DenseMatrix score_all(const Model& model, const std::array<DenseMatrix, 3>& unified);

// Candidate lists for every user with a target edge: all items minus the
// user's training positives and the edges in `extra_masks`.
std::vector<UserRanking> rank_items(const Model& model, const TripartiteGraph& train,
                                    const EdgeList& targets,
                                    const std::vector<const EdgeList*>& extra_masks);

RankingMetrics evaluate(const Model& model, const TripartiteGraph& train,
                        const EdgeList& targets,
                        const std::vector<const EdgeList*>& extra_masks,
                        const std::vector<int>& ks = kDefaultKs,
                        std::vector<UserMetrics>* per_user = nullptr);

// user_id,auc,mrr,ndcg10,ndcg50,recall10,recall50
std::string per_user_csv(const std::vector<UserMetrics>& rows, const IdDictionary* users,
                         const std::vector<int>& ks = kDefaultKs);

}  // namespace lsec
