#include "lsec/config_io.hpp"

#include <fstream>
#include <set>

namespace lsec {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void require_object(const json& j, const char* what, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(std::string("unknown key '") + k + "' in " + what);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

template <std::size_t N>
ordered_json flags_to_json(const std::array<bool, N>& flags) {
  ordered_json out = ordered_json::array();
  for (std::size_t i = 0; i < N; ++i) {
    if (flags[i]) out.push_back(i);
  }
  return out;
}

template <std::size_t N>
std::array<bool, N> flags_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be a list of ids");
  std::array<bool, N> flags{};
  for (const auto& v : j) {
    const int id = v.get<int>();
    if (id < 0 || id >= static_cast<int>(N)) {
      throw ConfigError(std::string(what) + " id " + std::to_string(id) + " out of range");
    }
    flags[id] = true;
  }
  return flags;
}

}  // namespace

ordered_json model_config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["embed_dim"] = c.embed_dim;
  j["layer_dims"] = c.layer_dims;
  j["aggregator"] = to_string(c.aggregator);
  j["relations"] = flags_to_json(c.relations);
  j["tasks"] = flags_to_json(c.tasks);
  j["alpha"] = c.alpha;
  j["mlp_hidden"] = c.mlp_hidden;
  j["negative_ratio"] = c.negative_ratio;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  return guarded("model", [&] {
    require_object(j, "model", {"embed_dim", "layer_dims", "aggregator", "relations", "tasks",
                                "alpha", "mlp_hidden", "negative_ratio"});
    ModelConfig c;
    read(j, "embed_dim", c.embed_dim);
    read(j, "layer_dims", c.layer_dims);
    if (j.contains("aggregator")) c.aggregator = aggregator_from_string(j.at("aggregator"));
    if (j.contains("relations")) c.relations = flags_from_json<3>(j.at("relations"), "relations");
    if (j.contains("tasks")) c.tasks = flags_from_json<2>(j.at("tasks"), "tasks");
    read(j, "alpha", c.alpha);
    read(j, "mlp_hidden", c.mlp_hidden);
    read(j, "negative_ratio", c.negative_ratio);
    c.validate();
    return c;
  });
}

ordered_json train_config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["eval_every"] = c.eval_every;
  j["seed"] = c.seed;
  j["fanout_quantile"] = c.fanout_quantile;
  j["pipeline"] = c.pipeline;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  return guarded("train", [&] {
    require_object(j, "train", {"lr", "batch_size", "max_epochs", "patience", "eval_every",
                                "seed", "fanout_quantile", "pipeline"});
    TrainConfig c;
    read(j, "lr", c.lr);
    read(j, "batch_size", c.batch_size);
    read(j, "max_epochs", c.max_epochs);
    read(j, "patience", c.patience);
    read(j, "eval_every", c.eval_every);
    read(j, "seed", c.seed);
    read(j, "fanout_quantile", c.fanout_quantile);
    read(j, "pipeline", c.pipeline);
    c.validate();
    return c;
  });
}

ordered_json gen_config_to_json(const GenConfig& c) {
  ordered_json j;
  j["n_users"] = c.n_users;
  j["n_items"] = c.n_items;
  j["n_streamers"] = c.n_streamers;
  j["influence_strength"] = c.influence_strength;
  j["buys_per_user"] = c.buys_per_user;
  j["follows_per_user"] = c.follows_per_user;
  j["catalog_exponent"] = c.catalog_exponent;
  j["seed"] = c.seed;
  return j;
}

GenConfig gen_config_from_json(const json& j) {
  return guarded("gen", [&] {
    require_object(j, "gen", {"n_users", "n_items", "n_streamers", "influence_strength",
                              "buys_per_user", "follows_per_user", "catalog_exponent", "seed"});
    GenConfig c;
    read(j, "n_users", c.n_users);
    read(j, "n_items", c.n_items);
    read(j, "n_streamers", c.n_streamers);
    read(j, "influence_strength", c.influence_strength);
    read(j, "buys_per_user", c.buys_per_user);
    read(j, "follows_per_user", c.follows_per_user);
    read(j, "catalog_exponent", c.catalog_exponent);
    read(j, "seed", c.seed);
    c.validate();
    return c;
  });
}

ordered_json split_spec_to_json(const SplitSpec& s) {
  ordered_json j;
  j["train_frac"] = s.train_frac;
  j["val_frac"] = s.val_frac;
  j["test_frac"] = s.test_frac;
  return j;
}

SplitSpec split_spec_from_json(const json& j) {
  return guarded("split", [&] {
    require_object(j, "split", {"train_frac", "val_frac", "test_frac"});
    SplitSpec s;
    read(j, "train_frac", s.train_frac);
    read(j, "val_frac", s.val_frac);
    read(j, "test_frac", s.test_frac);
    s.validate();
    return s;
  });
}

ordered_json analysis_params_to_json(const AnalysisParams& p) {
  ordered_json j;
  j["settings"] = ordered_json::array();
  for (Setting s : p.settings) j["settings"].push_back(to_string(s));
  j["n_mc"] = p.n_mc;
  j["n_pairs"] = p.n_pairs;
  j["user_levels"] = p.user_levels;
  j["item_levels"] = p.item_levels;
  j["seed"] = p.seed;
  j["similarity"] = p.similarity;
  return j;
}

AnalysisParams analysis_params_from_json(const json& j) {
  return guarded("analysis", [&] {
    require_object(j, "analysis", {"settings", "n_mc", "n_pairs", "user_levels", "item_levels",
                                   "seed", "similarity"});
    AnalysisParams p;
    if (j.contains("settings")) {
      p.settings.clear();
      for (const auto& s : j.at("settings")) p.settings.push_back(setting_from_string(s));
    }
    read(j, "n_mc", p.n_mc);
    read(j, "n_pairs", p.n_pairs);
    read(j, "user_levels", p.user_levels);
    read(j, "item_levels", p.item_levels);
    read(j, "seed", p.seed);
    read(j, "similarity", p.similarity);
    if (p.n_pairs == 0) throw ConfigError("analysis.n_pairs must be positive");
    for (const auto* levels : {&p.user_levels, &p.item_levels}) {
      for (double l : *levels) {
        if (!(l > 0.0 && l < 1.0)) throw ConfigError("quantile levels must lie in (0,1)");
      }
    }
    return p;
  });
}

ordered_json RunManifest::to_json() const {
  ordered_json j;
  j["gen"] = gen_config_to_json(gen);
  j["split"] = split_spec_to_json(split);
  j["model"] = model_config_to_json(train.model);
  j["train"] = train_config_to_json(train);
  j["analysis"] = analysis_params_to_json(analysis);
  j["data_dir"] = data_dir;
  j["output_dir"] = output_dir;
  j["repeat_count"] = repeat_count;
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  require_object(j, "manifest", {"gen", "split", "model", "train", "analysis", "data_dir",
                                 "output_dir", "repeat_count"});
  if (j.contains("gen")) m.gen = gen_config_from_json(j.at("gen"));
  if (j.contains("split")) m.split = split_spec_from_json(j.at("split"));
  if (j.contains("train")) m.train = train_config_from_json(j.at("train"));
  if (j.contains("model")) m.train.model = model_config_from_json(j.at("model"));
  if (j.contains("analysis")) m.analysis = analysis_params_from_json(j.at("analysis"));
  guarded("manifest", [&] {
    read(j, "data_dir", m.data_dir);
    read(j, "output_dir", m.output_dir);
    read(j, "repeat_count", m.repeat_count);
    return 0;
  });
  if (m.repeat_count == 0) throw ConfigError("repeat_count must be positive");
  return m;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

void RunManifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace lsec
