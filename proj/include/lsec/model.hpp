#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lsec/graph_store.hpp"
#include "lsec/numkit.hpp"
#include "lsec/sampler.hpp"

namespace lsec {

enum class Aggregator { GCN, LightGCN, None };

const char* to_string(Aggregator a) noexcept;
Aggregator aggregator_from_string(const std::string& s);

struct ModelConfig {
  std::size_t embed_dim = 200;
  std::vector<std::size_t> layer_dims{128, 64};
  Aggregator aggregator = Aggregator::GCN;
  std::array<bool, 3> relations{true, true, true};  // buy, follow, sell
  std::array<bool, 2> tasks{true, true};            // buy, follow
  double alpha = 0.5;
  std::size_t mlp_hidden = 128;
  int negative_ratio = 4;

  void validate() const;
  std::size_t n_layers() const noexcept { return layer_dims.size(); }
  // Width of one relation's final representation.
  std::size_t relation_width() const noexcept;
  // Width of the unified embedding of a kind; 0 when no active relation touches it.
  std::size_t unified_width(EntityKind kind) const noexcept;
  bool relation(Relation r) const noexcept { return relations[static_cast<int>(r)]; }
  bool task(Task t) const noexcept { return tasks[static_cast<int>(t)]; }
};

struct TaskMlp {
  ParamTensor w1, b1, w2, b2;
};

struct ModelParams {
  std::array<ParamTensor, 3> embeddings;  // indexed by EntityKind
  // weights[relation][layer]; GCN only.
  std::array<std::vector<ParamTensor>, 3> weights;
  // Shared d0 -> output projection; LightGCN only.
  std::optional<ParamTensor> projection;
  std::array<std::optional<TaskMlp>, 2> mlps;

  std::vector<ParamTensor*> all();
  std::vector<const ParamTensor*> all() const;
  void zero_grad();
};

// Per-relation encoder intermediates kept for the backward pass.
struct EncoderCache {
  std::vector<SparseMatrix> norm;   // one per layer
  std::vector<DenseMatrix> inputs;  // H^(l), l = 0..K
  std::vector<DenseMatrix> pre;     // GCN: N H W before activation
  std::vector<DenseMatrix> agg;     // GCN: N H
  DenseMatrix mean;                 // LightGCN layer mean over targets
  DenseMatrix output;               // final representation of the targets
};

// W1^T [l || r] = W1_l^T l + W1_r^T r, so each seed row is projected once and
// the hidden layer of a pair is a row sum.
struct PairCache {
  DenseMatrix left;        // seed rows of the left side
  DenseMatrix right;       // seed rows of the right side
  DenseMatrix proj_left;   // left W1_l
  DenseMatrix proj_right;  // right W1_r
  DenseMatrix hidden;      // per pair, before ReLU
  DenseMatrix logits;      // n x 1
};

struct ForwardState {
  std::array<std::optional<EncoderCache>, 3> encoders;
  std::array<DenseMatrix, 3> unified;  // per kind, rows follow the seed order
  std::array<std::optional<PairCache>, 2> tasks;
};

struct LossResult {
  double total = 0.0;
  std::array<std::optional<double>, 2> task_loss;
  std::array<DenseMatrix, 2> grad_logits;
};

class Model {
 public:
  Model(ModelConfig config, ModelParams params, std::array<std::size_t, 3> counts);

  const ModelConfig& config() const noexcept { return config_; }
  ModelParams& params() noexcept { return params_; }
  const ModelParams& params() const noexcept { return params_; }
  std::size_t count(EntityKind kind) const noexcept { return counts_[static_cast<int>(kind)]; }

  // Encodes one relation over its blocks; returns the targets' representations.
  DenseMatrix encode_bipartite(Relation rel, const RelationBlocks& blocks,
                               EncoderCache* cache = nullptr) const;

  // Full forward pass over a mini-batch; logits are held per task.
  ForwardState forward(const MiniBatch& batch) const;
  // Accumulates parameter gradients from logit gradients.
  void backward(const MiniBatch& batch, const ForwardState& state,
                const std::array<DenseMatrix, 2>& grad_logits);

  // Unified embeddings of every node, using complete neighborhoods.
  std::array<DenseMatrix, 3> embed_all(const TripartiteGraph& graph) const;

  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  ModelParams params_;
  std::array<std::size_t, 3> counts_;
};

Model init_model(const ModelConfig& config, const TripartiteGraph& graph, std::uint64_t seed);
Model init_model(const ModelConfig& config, std::array<std::size_t, 3> counts, std::uint64_t seed);

// Concatenates per-relation target outputs in ascending relation order.
// `seeds` gives the rows of each kind; relation outputs follow the
// RelationBlocks target order (left seeds, then right seeds).
std::array<DenseMatrix, 3> unify_embeddings(const std::array<const DenseMatrix*, 3>& outputs,
                                            const SeedNodes& seeds);

// Row position of every pair endpoint in the seed lists.
std::vector<std::size_t> seed_positions(const std::vector<std::int32_t>& seeds,
                                        const std::vector<LabeledEdge>& edges, bool left);

// logit = w2^T relu(w1^T [v_left || v_right] + b1) + b2
DenseMatrix predict_pairs(const DenseMatrix& left, const DenseMatrix& right,
                          const std::vector<std::size_t>& left_rows,
                          const std::vector<std::size_t>& right_rows, const TaskMlp& mlp,
                          PairCache* cache = nullptr);

// Accumulates the predictor gradients and returns those of the left and
// right seed rows.
std::pair<DenseMatrix, DenseMatrix> predict_pairs_backward(const PairCache& cache,
                                                           const std::vector<std::size_t>& left_rows,
                                                           const std::vector<std::size_t>& right_rows,
                                                           TaskMlp& mlp,
                                                           const DenseMatrix& grad_logits);

// alpha * L_buy + (1 - alpha) * L_follow when both tasks are active, else the
// single active task's loss. Labels are taken from the batch edges.
LossResult compute_loss(const std::array<std::optional<DenseMatrix>, 2>& logits,
                        const std::array<std::vector<LabeledEdge>, 2>& edges, double alpha);

// Full block structure (every node, every neighbor) for inference and tests.
RelationBlocks full_relation_blocks(const TripartiteGraph& graph, Relation rel,
                                    std::size_t n_layers);

}  // namespace lsec
