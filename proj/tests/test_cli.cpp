#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lsec/cli.hpp"
#include "lsec/config_io.hpp"

using namespace lsec;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lsec_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A manifest small enough to train in well under a second.
RunManifest tiny_manifest(const fs::path& dir) {
  RunManifest m;
  m.gen.n_users = 200;
  m.gen.n_items = 120;
  m.gen.n_streamers = 12;
  m.train.model.embed_dim = 8;
  m.train.model.layer_dims = {8};
  m.train.model.mlp_hidden = 8;
  m.train.batch_size = 512;
  m.train.max_epochs = 2;
  m.train.lr = 5e-3;
  m.analysis.n_pairs = 2000;
  m.output_dir = (dir / "out").string();
  return m;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  auto r = cli({});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: code=usage msg=", 0) == 0);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"generate"}).code == 1);  // --out is required
  CHECK(cli({"evaluate", "--checkpoint", "x", "--data", "y", "--split", "train"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("missing inputs exit 2 with a one-line error") {
  const auto dir = scratch("missing");
  auto r = cli({"split", "--data", (dir / "nothing").string(), "--out", (dir / "s").string()});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: code=", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  CHECK(cli({"train", "--manifest", (dir / "none.json").string()}).code == 2);
}

TEST_CASE("manifests round-trip and reject unknown keys") {
  const auto dir = scratch("manifest");
  const auto m = tiny_manifest(dir);
  m.save(dir / "m.json");
  const auto back = RunManifest::load(dir / "m.json");
  CHECK(back.to_json() == m.to_json());

  auto j = m.to_json();
  j["train"]["learning_rate"] = 0.1;
  CHECK_THROWS_AS(RunManifest::from_json(j), ConfigError);
  std::ofstream(dir / "bad.json") << j.dump();
  const auto r = cli({"train", "--manifest", (dir / "bad.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: code=", 0) == 0);

  auto partial = nlohmann::json::parse(R"({"gen": {"n_users": 50}})");
  CHECK(RunManifest::from_json(partial).gen.n_users == 50);
  CHECK(RunManifest::from_json(partial).train.lr == TrainConfig{}.lr);
}

TEST_CASE("generate, split, analyze, evaluate and export chain together") {
  const auto dir = scratch("chain");
  const auto m = tiny_manifest(dir);
  m.save(dir / "m.json");
  const auto mp = (dir / "m.json").string();

  auto r = cli({"generate", "--manifest", mp, "--out", (dir / "data").string(), "--seed", "3"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("buy") != std::string::npos);

  r = cli({"split", "--manifest", mp, "--data", (dir / "data").string(), "--out",
           (dir / "split").string()});
  REQUIRE(r.code == 0);
  const auto sj = nlohmann::json::parse(r.out);
  CHECK(sj.is_object());

  r = cli({"analyze", "--manifest", mp, "--data", (dir / "data").string(), "--setting", "S2",
           "--n-mc", "2000", "--no-similarity", "--out", (dir / "report.json").string()});
  REQUIRE(r.code == 0);
  CHECK(!r.out.empty());
  CHECK(nlohmann::json::parse(slurp(dir / "report.json")).is_object());

  auto tm = m;
  tm.data_dir = (dir / "split").string();
  tm.save(dir / "t.json");
  r = cli({"train", "--manifest", (dir / "t.json").string()});
  REQUIRE(r.code == 0);
  const auto out = fs::path(tm.output_dir);
  for (const char* f : {"manifest.json", "checkpoint.bin", "history.json", "metrics.json"}) {
    CHECK(fs::exists(out / f));
  }

  r = cli({"evaluate", "--checkpoint", (out / "checkpoint.bin").string(), "--data",
           (dir / "split").string(), "--per-user", (dir / "users.csv").string()});
  REQUIRE(r.code == 0);
  const auto ej = nlohmann::json::parse(r.out);
  const auto mj = nlohmann::json::parse(slurp(out / "metrics.json"));
  CHECK(ej == mj["test"]);
  CHECK(slurp(dir / "users.csv").rfind("user", 0) == 0);

  r = cli({"export-embeddings", "--checkpoint", (out / "checkpoint.bin").string(), "--data",
           (dir / "split").string(), "--out", (dir / "emb.tsv").string()});
  REQUIRE(r.code == 0);
  const auto tsv = slurp(dir / "emb.tsv");
  CHECK(tsv.find("user\t") != std::string::npos);
  CHECK(tsv.find("item\t") != std::string::npos);

  r = cli({"evaluate", "--checkpoint", (dir / "emb.tsv").string(), "--data",
           (dir / "split").string()});
  CHECK(r.code == 2);
}

TEST_CASE("training twice with the same seed writes identical metrics") {
  const auto dir = scratch("repeat");
  auto m = tiny_manifest(dir);
  m.save(dir / "m.json");
  const auto mp = (dir / "m.json").string();
  const auto a = (dir / "a").string(), b = (dir / "b").string();
  REQUIRE(cli({"train", "--manifest", mp, "--seed", "7", "--out", a}).code == 0);
  REQUIRE(cli({"train", "--manifest", mp, "--seed", "7", "--out", b}).code == 0);
  CHECK(slurp(fs::path(a) / "metrics.json") == slurp(fs::path(b) / "metrics.json"));
  CHECK(slurp(fs::path(a) / "checkpoint.bin") == slurp(fs::path(b) / "checkpoint.bin"));
  CHECK(RunManifest::load(fs::path(a) / "manifest.json").train.seed == 7);
}
