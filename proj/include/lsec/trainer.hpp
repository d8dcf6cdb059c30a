#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lsec/datagen.hpp"
#include "lsec/eval.hpp"
#include "lsec/model.hpp"
#include "lsec/sampler.hpp"

namespace lsec {

struct TrainConfig {
  ModelConfig model;
  double lr = 5e-4;
  std::size_t batch_size = 4096;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  std::size_t eval_every = 1;
  std::uint64_t seed = 1;
  // Fanout per relation and direction is this quantile of the degrees.
  double fanout_quantile = 0.9;
  // Builds batch b+1 on a second thread while batch b trains.
  bool pipeline = false;

  void validate() const;
};

struct EpochLosses {
  std::array<std::optional<double>, 2> task_loss;
  std::size_t n_batches = 0;
  std::size_t skipped_negative_nodes = 0;
};

// One pass over the shuffled training positives with one Adam step per batch.
EpochLosses train_epoch(Model& model, const TripartiteGraph& train, const TrainConfig& config,
                        const FanoutPlan& fanout, std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the untrained model
  std::array<std::optional<double>, 2> task_loss;
  std::optional<RankingMetrics> validation;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_recall10 = 0.0;
  double initial_recall10 = 0.0;

  // Wall-clock fields are left out when `timings` is false.
  std::string to_json(bool timings = true) const;
};

// Tracks the best validation score. stop() turns true after `patience`
// evaluations in a row without a strict improvement.
class EarlyStopping {
 public:
  EarlyStopping(double initial, std::size_t patience) : best_(initial), patience_(patience) {}

  // True when `value` is a new best.
  bool observe(double value) noexcept {
    if (value > best_) {
      best_ = value;
      bad_ = 0;
      return true;
    }
    ++bad_;
    return false;
  }
  bool stop() const noexcept { return bad_ >= patience_; }
  double best() const noexcept { return best_; }

 private:
  double best_;
  std::size_t patience_;
  std::size_t bad_ = 0;
};

struct FitResult {
  Model model;
  TrainHistory history;
};

// Trains with early stopping on validation Recall@10 and returns the best
// parameters seen. Log lines go to `log` when given.
FitResult fit(const TrainConfig& config, const SplitResult& data, std::ostream* log = nullptr);

// The relation/task rows of the ablation grid.
struct AblationRow {
  std::array<bool, 3> relations;
  std::array<bool, 2> tasks;
  std::string label() const;
};

std::vector<AblationRow> ablation_grid();

}  // namespace lsec
