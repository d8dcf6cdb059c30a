#include "lsec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <random>

#include "json.hpp"
#include "lsec/rng.hpp"

namespace lsec {

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
  if (!(fanout_quantile > 0.0 && fanout_quantile <= 1.0)) {
    throw ConfigError("fanout_quantile must lie in (0,1]");
  }
}

namespace {

struct BatchPlan {
  std::vector<Edge> buy;
  std::vector<Edge> follow;
  std::size_t n_batches = 0;
  bool buy_primary = true;

  // Primary slice [begin, end) plus the proportional share of the other task.
  std::pair<std::span<const Edge>, std::span<const Edge>> batch(std::size_t b,
                                                                std::size_t batch_size) const {
    const auto& primary = buy_primary ? buy : follow;
    const auto& other = buy_primary ? follow : buy;
    const std::size_t p = primary.size();
    const std::size_t begin = b * batch_size;
    const std::size_t end = std::min(p, begin + batch_size);
    std::span<const Edge> first(primary.data() + begin, end - begin);
    std::span<const Edge> second;
    if (!other.empty()) {
      const auto scale = [&](std::size_t x) {
        return static_cast<std::size_t>((static_cast<unsigned __int128>(x) * other.size()) / p);
      };
      std::size_t ob = scale(begin);
      std::size_t oe = scale(end);
      if (oe <= ob) oe = std::min(other.size(), ob + 1);
      if (oe <= ob) ob = oe - 1;
      second = std::span<const Edge>(other.data() + ob, oe - ob);
    }
    if (buy_primary) return {first, second};
    return {second, first};
  }
};

BatchPlan plan_epoch(const TripartiteGraph& train, const TrainConfig& config, std::size_t epoch) {
  BatchPlan plan;
  const auto& tasks = config.model.tasks;
  if (tasks[0]) plan.buy = train.buy.edges().edges;
  if (tasks[1]) plan.follow = train.follow.edges().edges;
  if (tasks[0] && plan.buy.empty()) throw ContractError("training split has no buy edges");
  if (tasks[1] && plan.follow.empty()) throw ContractError("training split has no follow edges");
  plan.buy_primary = tasks[0];
  std::mt19937_64 rng_buy(derive_seed({config.seed, epoch, 0x5b}));
  std::mt19937_64 rng_follow(derive_seed({config.seed, epoch, 0x5f}));
  std::shuffle(plan.buy.begin(), plan.buy.end(), rng_buy);
  std::shuffle(plan.follow.begin(), plan.follow.end(), rng_follow);
  const std::size_t p = plan.buy_primary ? plan.buy.size() : plan.follow.size();
  plan.n_batches = (p + config.batch_size - 1) / config.batch_size;
  return plan;
}

}  // namespace

EpochLosses train_epoch(Model& model, const TripartiteGraph& train, const TrainConfig& config,
                        const FanoutPlan& fanout, std::size_t epoch) {
  const ModelConfig& mc = model.config();
  const BatchPlan plan = plan_epoch(train, config, epoch);
  const std::size_t n_layers = mc.aggregator == Aggregator::None ? 0 : mc.n_layers();

  auto build = [&](std::size_t b) {
    BatchRequest req;
    const auto [buy, follow] = plan.batch(b, config.batch_size);
    req.buy_positives = buy;
    req.follow_positives = follow;
    req.relations = mc.relations;
    req.tasks = mc.tasks;
    req.fanout = fanout;
    req.n_layers = n_layers;
    req.negative_ratio = mc.negative_ratio;
    req.seed = derive_seed({config.seed, epoch, b});
    return make_minibatch(train, req);
  };

  EpochLosses out;
  std::array<double, 2> sums{0.0, 0.0};
  std::vector<ParamTensor*> params = model.params().all();
  std::future<MiniBatch> next;
  if (config.pipeline && plan.n_batches > 0) next = std::async(std::launch::async, build, 0);
  for (std::size_t b = 0; b < plan.n_batches; ++b) {
    MiniBatch batch = config.pipeline ? next.get() : build(b);
    if (config.pipeline && b + 1 < plan.n_batches) {
      next = std::async(std::launch::async, build, b + 1);
    }
    const ForwardState st = model.forward(batch);
    std::array<std::optional<DenseMatrix>, 2> logits;
    for (int t = 0; t < 2; ++t) {
      if (st.tasks[t]) logits[t] = st.tasks[t]->logits;
    }
    const LossResult loss = compute_loss(logits, batch.task_edges, mc.alpha);
    model.backward(batch, st, loss.grad_logits);
    adam_step(params, AdamConfig{config.lr});
    for (int t = 0; t < 2; ++t) {
      if (loss.task_loss[t]) sums[t] += *loss.task_loss[t];
    }
    out.skipped_negative_nodes += batch.skipped_negative_nodes;
    ++out.n_batches;
  }
  for (int t = 0; t < 2; ++t) {
    if (mc.tasks[t] && out.n_batches > 0) {
      out.task_loss[t] = sums[t] / static_cast<double>(out.n_batches);
    }
  }
  return out;
}

std::string TrainHistory::to_json(bool timings) const {
  nlohmann::ordered_json j;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json r;
    r["epoch"] = e.epoch;
    r["loss_buy"] = e.task_loss[0] ? nlohmann::ordered_json(*e.task_loss[0]) : nullptr;
    r["loss_follow"] = e.task_loss[1] ? nlohmann::ordered_json(*e.task_loss[1]) : nullptr;
    r["validation"] = e.validation ? nlohmann::ordered_json::parse(e.validation->to_json())
                                   : nlohmann::ordered_json(nullptr);
    if (timings) r["seconds"] = e.seconds;
    j["epochs"].push_back(std::move(r));
  }
  j["best_epoch"] = best_epoch;
  j["best_recall10"] = best_recall10;
  j["initial_recall10"] = initial_recall10;
  return j.dump(2);
}

namespace {

std::string fmt_loss(const std::optional<double>& v) {
  if (!v) return "na";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

FitResult fit(const TrainConfig& config, const SplitResult& data, std::ostream* log) {
  config.validate();
  if (data.val.edges.empty()) throw ConfigError("validation split is empty");
  const TripartiteGraph& train = data.train;
  Model model = init_model(config.model, train, derive_seed({config.seed, 0x1417}));
  const FanoutPlan fanout = FanoutPlan::from_quantile(train, config.fanout_quantile);

  using clock = std::chrono::steady_clock;
  TrainHistory history;
  auto validate_now = [&] { return evaluate(model, train, data.val, {}); };

  auto t0 = clock::now();
  EpochRecord initial;
  initial.validation = validate_now();
  initial.seconds = std::chrono::duration<double>(clock::now() - t0).count();
  history.initial_recall10 = initial.validation->recall.at(10);
  history.best_recall10 = history.initial_recall10;
  history.epochs.push_back(initial);
  if (log) *log << "epoch=0 loss_buy=na loss_follow=na recall10=" << history.initial_recall10 << '\n';
  ModelParams best = model.params();

  EarlyStopping stopping(history.initial_recall10, config.patience);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    t0 = clock::now();
    const EpochLosses losses = train_epoch(model, train, config, fanout, epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.task_loss = losses.task_loss;
    const bool eval_now = epoch % config.eval_every == 0 || epoch == config.max_epochs;
    if (eval_now) rec.validation = validate_now();
    rec.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    history.epochs.push_back(rec);
    if (log) {
      *log << "epoch=" << epoch << " loss_buy=" << fmt_loss(rec.task_loss[0])
           << " loss_follow=" << fmt_loss(rec.task_loss[1]) << " recall10=";
      if (rec.validation) {
        *log << rec.validation->recall.at(10);
      } else {
        *log << "na";
      }
      *log << '\n';
    }
    if (!eval_now) continue;
    if (stopping.observe(rec.validation->recall.at(10))) {
      history.best_recall10 = stopping.best();
      history.best_epoch = epoch;
      best = model.params();
    } else if (stopping.stop()) {
      break;
    }
  }
  model.params() = std::move(best);
  return {std::move(model), std::move(history)};
}

std::string AblationRow::label() const {
  std::string s = "relations=";
  bool first = true;
  for (int r = 0; r < 3; ++r) {
    if (!relations[r]) continue;
    if (!first) s += ',';
    s += std::to_string(r);
    first = false;
  }
  s += " tasks=";
  first = true;
  for (int t = 0; t < 2; ++t) {
    if (!tasks[t]) continue;
    if (!first) s += ',';
    s += std::to_string(t);
    first = false;
  }
  return s;
}

std::vector<AblationRow> ablation_grid() {
  return {
      {{true, false, false}, {true, false}},
      {{true, true, false}, {true, false}},
      {{true, false, true}, {true, false}},
      {{true, true, true}, {true, false}},
      {{true, true, true}, {true, true}},
  };
}

}  // namespace lsec
