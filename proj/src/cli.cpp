#include "lsec/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsec/config_io.hpp"
#include "lsec/datagen.hpp"
#include "lsec/eval.hpp"
#include "lsec/influence.hpp"
#include "lsec/kernels.hpp"
#include "lsec/model.hpp"
#include "lsec/trainer.hpp"

namespace lsec {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

struct Prepared {
  Dictionaries dicts;
  SplitResult split;
};

// Split data from data_dir when set, otherwise generated from the manifest.
Prepared prepare_data(const RunManifest& m) {
  if (!m.data_dir.empty()) {
    LoadedSplit s = load_split(m.data_dir);
    return {std::move(s.dicts), std::move(s.split)};
  }
  const TripartiteGraph g = generate(m.gen);
  return {synthetic_dictionaries(g.n_users, g.n_items, g.n_streamers),
          chronological_split(g, m.split)};
}

nlohmann::ordered_json metrics_json(const RankingMetrics& r) {
  return nlohmann::ordered_json::parse(r.to_json());
}

// Label of each node: the streamer it interacts with most.
//   user: argmax over streamers of |catalog ∩ purchases| + [follows]
//   item: argmax over its sellers of the number of its buyers following them
//   streamer: itself
// Ties go to the lowest index; "none" when every score is 0.
std::vector<std::string> node_labels(const TripartiteGraph& g, EntityKind kind,
                                     const Dictionaries& dicts) {
  const std::size_t n = g.count(kind);
  std::vector<std::string> labels(n, "none");
  if (kind == EntityKind::Streamer) {
    for (std::size_t s = 0; s < n; ++s) labels[s] = dicts.streamers.decode(static_cast<std::int32_t>(s));
    return labels;
  }
  std::vector<std::int64_t> score(g.n_streamers);
  for (std::size_t x = 0; x < n; ++x) {
    std::fill(score.begin(), score.end(), 0);
    if (kind == EntityKind::User) {
      for (auto item : g.buy.forward.neighbors(x)) {
        for (auto s : g.sell.reverse.neighbors(static_cast<std::size_t>(item))) ++score[s];
      }
      for (auto s : g.follow.forward.neighbors(x)) ++score[s];
    } else {
      for (auto s : g.sell.reverse.neighbors(x)) score[s] = 1;
      for (auto u : g.buy.reverse.neighbors(x)) {
        for (auto s : g.follow.forward.neighbors(static_cast<std::size_t>(u))) {
          if (score[s] > 0) ++score[s];
        }
      }
    }
    const auto best = std::max_element(score.begin(), score.end());
    if (best != score.end() && *best > 0) {
      labels[x] = dicts.streamers.decode(static_cast<std::int32_t>(best - score.begin()));
    }
  }
  return labels;
}

std::string format_mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << mean << "±" << sd;
  return s.str();
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return 1;
    case ErrorKind::Data: return 2;
    case ErrorKind::Runtime: return 3;
  }
  return 3;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (const char* env = std::getenv("LSEC_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) kernels::set_thread_limit(n);
  }

  CLI::App app{"Streamer-aware recommendation toolkit", "lsec"};
  app.require_subcommand(1);

  std::string manifest_path, out_path, data_dir, checkpoint, split_name = "test", per_user_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> influence;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> n_mc, n_pairs;
  bool no_similarity = false;

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen->add_option("--manifest", manifest_path);
  gen->add_option("--out", out_path)->required();
  gen->add_option("--seed", seed);
  gen->add_option("--influence", influence, "probability of a catalog-driven purchase");

  auto* split = app.add_subcommand("split", "chronological train/val/test split");
  split->add_option("--manifest", manifest_path);
  split->add_option("--data", data_dir)->required();
  split->add_option("--out", out_path)->required();

  auto* analyze_cmd = app.add_subcommand("analyze", "streamer influence report");
  analyze_cmd->add_option("--manifest", manifest_path);
  analyze_cmd->add_option("--data", data_dir)->required();
  analyze_cmd->add_option("--setting", settings, "S1 or S2; repeatable");
  analyze_cmd->add_option("--seed", seed);
  analyze_cmd->add_option("--n-mc", n_mc);
  analyze_cmd->add_option("--n-pairs", n_pairs);
  analyze_cmd->add_flag("--no-similarity", no_similarity);
  analyze_cmd->add_option("--out", out_path, "JSON report path");

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--manifest", manifest_path)->required();
  train->add_option("--seed", seed);
  train->add_option("--out", out_path, "output directory; overrides the manifest");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "ranking metrics of a checkpoint");
  evaluate_cmd->add_option("--checkpoint", checkpoint)->required();
  evaluate_cmd->add_option("--data", data_dir, "split directory")->required();
  evaluate_cmd->add_option("--split", split_name)->check(CLI::IsMember({"val", "test"}));
  evaluate_cmd->add_option("--out", out_path);
  evaluate_cmd->add_option("--per-user", per_user_path, "per-user CSV path");

  auto* exp = app.add_subcommand("export-embeddings", "unified embeddings as TSV");
  exp->add_option("--checkpoint", checkpoint)->required();
  exp->add_option("--data", data_dir, "split directory")->required();
  exp->add_option("--out", out_path)->required();

  auto* ablate = app.add_subcommand("ablate", "relation/task ablation grid");
  ablate->add_option("--manifest", manifest_path)->required();
  ablate->add_option("--out", out_path, "output directory; overrides the manifest");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: code=usage msg=" << one_line(e.what()) << '\n';
    return 1;
  }

  try {
    RunManifest m;
    if (!manifest_path.empty()) m = RunManifest::load(manifest_path);

    if (*gen) {
      if (seed) m.gen.seed = *seed;
      if (influence) m.gen.influence_strength = *influence;
      m.gen.validate();
      const TripartiteGraph g = generate(m.gen);
      write_dataset(out_path,
                    Dataset{synthetic_dictionaries(g.n_users, g.n_items, g.n_streamers), g});
      out << "wrote " << g.buy.edge_count() << " buy, " << g.follow.edge_count() << " follow, "
          << g.sell.edge_count() << " sell edges to " << out_path << '\n';
      return 0;
    }

    if (*split) {
      Dataset d = load_dataset(data_dir);
      const SplitResult s = chronological_split(d.graph, m.split);
      write_split(out_path, s, d.dicts);
      out << split_manifest_json(s) << '\n';
      return 0;
    }

    if (*analyze_cmd) {
      const Dataset d = load_dataset(data_dir);
      AnalysisParams p = m.analysis;
      if (!settings.empty()) {
        p.settings.clear();
        for (const auto& s : settings) p.settings.push_back(setting_from_string(s));
      }
      if (seed) p.seed = *seed;
      if (n_mc) p.n_mc = *n_mc;
      if (n_pairs) p.n_pairs = *n_pairs;
      if (no_similarity) p.similarity = false;
      const InfluenceReport report = analyze(d.graph, p);
      out << report.to_text();
      if (!out_path.empty()) write_text(out_path, report.to_json());
      return 0;
    }

    if (*train) {
      if (seed) m.train.seed = *seed;
      if (!out_path.empty()) m.output_dir = out_path;
      m.train.validate();
      const fs::path dir = m.output_dir;
      fs::create_directories(dir);
      m.save(dir / "manifest.json");
      const Prepared data = prepare_data(m);
      FitResult fr = fit(m.train, data.split, &out);
      fr.model.save(dir / "checkpoint.bin");
      write_text(dir / "history.json", fr.history.to_json(false));
      nlohmann::ordered_json metrics;
      metrics["best_epoch"] = fr.history.best_epoch;
      metrics["validation"] = metrics_json(evaluate(fr.model, data.split.train, data.split.val, {}));
      metrics["test"] =
          metrics_json(evaluate(fr.model, data.split.train, data.split.test, {&data.split.val}));
      write_text(dir / "metrics.json", metrics.dump(2));
      out << "test " << metrics["test"].dump() << '\n';
      return 0;
    }

    if (*evaluate_cmd) {
      const Model model = Model::load(checkpoint);
      const LoadedSplit s = load_split(data_dir);
      const bool test = split_name == "test";
      std::vector<const EdgeList*> masks;
      if (test) masks.push_back(&s.split.val);
      std::vector<UserMetrics> rows;
      const RankingMetrics r = evaluate(model, s.split.train, test ? s.split.test : s.split.val,
                                        masks, kDefaultKs, &rows);
      out << r.to_json() << '\n';
      if (!out_path.empty()) write_text(out_path, r.to_json());
      if (!per_user_path.empty()) write_text(per_user_path, per_user_csv(rows, &s.dicts.users));
      return 0;
    }

    if (*exp) {
      const Model model = Model::load(checkpoint);
      const LoadedSplit s = load_split(data_dir);
      const TripartiteGraph& g = s.split.train;
      const auto unified = model.embed_all(g);
      std::ostringstream tsv;
      tsv.precision(17);
      for (EntityKind kind : {EntityKind::User, EntityKind::Item, EntityKind::Streamer}) {
        const DenseMatrix& e = unified[static_cast<int>(kind)];
        if (e.rows() == 0) continue;
        const auto labels = node_labels(g, kind, s.dicts);
        for (std::size_t x = 0; x < e.rows(); ++x) {
          tsv << to_string(kind) << '\t' << s.dicts.of(kind).decode(static_cast<std::int32_t>(x))
              << '\t';
          for (std::size_t c = 0; c < e.cols(); ++c) tsv << (c ? "," : "") << e(x, c);
          tsv << '\t' << labels[x] << '\n';
        }
      }
      write_text(out_path, tsv.str());
      return 0;
    }

    if (*ablate) {
      if (!out_path.empty()) m.output_dir = out_path;
      const fs::path dir = m.output_dir;
      fs::create_directories(dir);
      m.save(dir / "manifest.json");
      const Prepared data = prepare_data(m);
      nlohmann::ordered_json report = nlohmann::ordered_json::array();
      std::ostringstream table;
      table << std::left << std::setw(26) << "config" << std::setw(18) << "AUC" << std::setw(18)
            << "MRR" << std::setw(18) << "NDCG@10" << std::setw(18) << "NDCG@50"
            << std::setw(18) << "Recall@10" << "Recall@50\n";
      for (const AblationRow& row : ablation_grid()) {
        TrainConfig tc = m.train;
        tc.model.relations = row.relations;
        tc.model.tasks = row.tasks;
        std::vector<std::vector<double>> cols(6);
        nlohmann::ordered_json runs = nlohmann::ordered_json::array();
        for (std::size_t r = 0; r < m.repeat_count; ++r) {
          tc.seed = m.train.seed + r;
          const FitResult fr = fit(tc, data.split);
          const RankingMetrics t =
              evaluate(fr.model, data.split.train, data.split.test, {&data.split.val});
          const double vals[6] = {t.auc, t.mrr, t.ndcg.at(10), t.ndcg.at(50), t.recall.at(10),
                                  t.recall.at(50)};
          for (int c = 0; c < 6; ++c) cols[c].push_back(vals[c]);
          nlohmann::ordered_json run;
          run["seed"] = tc.seed;
          run["test"] = metrics_json(t);
          runs.push_back(std::move(run));
        }
        nlohmann::ordered_json entry;
        entry["relations"] = model_config_to_json(tc.model)["relations"];
        entry["tasks"] = model_config_to_json(tc.model)["tasks"];
        entry["runs"] = std::move(runs);
        report.push_back(std::move(entry));
        table << std::setw(26) << row.label();
        for (int c = 0; c < 6; ++c) {
          const std::string cell = format_mean_std(cols[c]);
          // "±" is two bytes wide in UTF-8 but one column on screen.
          table << cell << std::string(cell.size() < 19 ? 19 - cell.size() : 1, ' ');
        }
        table << '\n';
      }
      write_text(dir / "ablation.json", report.dump(2));
      write_text(dir / "ablation.txt", table.str());
      out << table.str();
      return 0;
    }
  } catch (const Error& e) {
    err << "error: code=" << e.code() << " msg=" << one_line(e.what()) << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: code=io msg=" << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: code=internal msg=" << one_line(e.what()) << '\n';
    return 3;
  }
  return 1;
}

}  // namespace lsec
