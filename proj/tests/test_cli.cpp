// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = optm::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("generate writes a deterministic CSV") {
  TempDir dir("optm_cli_gen");
  const auto a = (dir.path / "a.csv").string();
  const auto b = (dir.path / "b.csv").string();
  auto r = run({"generate", "--regime", "random_walk", "--events", "10000", "--seed", "7", "--out", a});
  CHECK(r.code == 0);
  CHECK(r.out.find("events=10000") != std::string::npos);
  CHECK(run({"generate", "--regime", "random_walk", "--events", "10000", "--seed", "7", "--out", b}).code == 0);
  CHECK(lines(slurp(a)) == 10001);
  CHECK(slurp(a) == slurp(b));

  CHECK(run({"generate", "--events", "1", "--out", (dir.path / "c.csv").string()}).code == 2);
  CHECK(run({"generate", "--events", "10", "--regime", "sideways", "--out", b}).code == 2);
  CHECK(run({"generate", "--events", "10", "--out", "/nonexistent/dir/x.csv"}).code == 2);
}

TEST_CASE("benchmark produces one record per cell") {
  TempDir dir("optm_cli_bench");
  const auto data = (dir.path / "lob.csv").string();
  REQUIRE(run({"generate", "--regime", "trend", "--events", "6000", "--seed", "1", "--out", data}).code == 0);
  const auto out = dir.path / "res";
  auto r = run({"benchmark", "--models", "optm,lstm,gru,persistence,naive", "--sizes", "1000,5000", "--regime",
                "short", "--data", data, "--test-len", "200", "--out", out.string(), "--jobs", "1"});
  const std::string records = slurp(out / "results.jsonl");
  CHECK(lines(records) == 10);
  // exit status mirrors whether any record failed
  CHECK(r.code == (records.find("\"status\":\"failed\"") == std::string::npos ? 0 : 1));
  CHECK(slurp(out / "table.txt") == r.out);
  CHECK(fs::exists(out / "run_config.json"));

  const auto out_long = dir.path / "long";
  r = run({"benchmark", "--models", "persistence,naive", "--sizes", "1000", "--regime", "long", "--data", data,
           "--test-len", "200", "--out", out_long.string()});
  CHECK(r.code == 0);
  const auto text = slurp(out_long / "results.jsonl");
  CHECK(lines(text) == 2);
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    CHECK(line.find("early_stop_patience") != std::string::npos);
    CHECK(line.find("stopped_early") != std::string::npos);
  }
}

TEST_CASE("benchmark input errors leave no output") {
  TempDir dir("optm_cli_bad");
  const auto out = dir.path / "res";
  auto r = run({"benchmark", "--data", (dir.path / "missing.csv").string(), "--out", out.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("missing.csv") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  r = run({"benchmark", "--out", out.string()});
  CHECK(r.code == 2);
  r = run({"benchmark", "--synthetic", "trend", "--events", "500", "--sizes", "1000", "--out", out.string()});
  CHECK(r.code == 2);
  r = run({"benchmark", "--synthetic", "trend", "--models", "optm,bogus", "--out", out.string()});
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("benchmark reports failed runs with exit 1") {
  TempDir dir("optm_cli_fail");
  const auto out = dir.path / "res";
  auto r = run({"benchmark", "--synthetic", "trend", "--events", "500", "--models", "optm,persistence", "--sizes",
                "200", "--test-len", "100", "--repo-alpha", "1e6", "--out", out.string()});
  CHECK(r.code == 1);
  CHECK(slurp(out / "results.jsonl").find("\"status\":\"failed\"") != std::string::npos);
}

TEST_CASE("config file with flag overrides") {
  TempDir dir("optm_cli_cfg");
  const auto cfg = dir.path / "run.json";
  std::ofstream(cfg) << R"({"synthetic": {"regime": "trend", "events": 800, "seed": 2},
                            "models": ["persistence", "naive"], "sizes": [300], "test_len": 400})";
  const auto out = dir.path / "res";
  auto r = run({"benchmark", "--config", cfg.string(), "--test-len", "100", "--out", out.string()});
  CHECK(r.code == 0);
  const auto text = slurp(out / "results.jsonl");
  CHECK(lines(text) == 2);
  CHECK(text.find("\"test_len\":100") != std::string::npos);
  CHECK(slurp(out / "run_config.json").find("\"events\": 800") != std::string::npos);

  std::ofstream(cfg) << "{ not json";
  CHECK(run({"benchmark", "--config", cfg.string(), "--out", out.string()}).code == 2);
}

TEST_CASE("train then evaluate") {
  TempDir dir("optm_cli_train");
  const auto ck = (dir.path / "ck.json").string();
  auto r = run({"train", "--synthetic", "mean_revert", "--events", "600", "--model", "optm", "--train-size", "300",
                "--out", ck});
  CHECK(r.code == 0);
  CHECK(r.out.find("epoch 5") != std::string::npos);
  r = run({"evaluate", "--checkpoint", ck, "--synthetic", "mean_revert", "--events", "600", "--start", "299",
           "--test-len", "200", "--out", (dir.path / "eval").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("test_mse") != std::string::npos);
  CHECK(lines(slurp(dir.path / "eval" / "predictions.csv")) == 201);

  CHECK(run({"evaluate", "--checkpoint", ck, "--synthetic", "mean_revert", "--events", "600", "--start", "500",
             "--test-len", "200"})
            .code == 2);
  CHECK(run({"evaluate", "--checkpoint", (dir.path / "nope.json").string(), "--synthetic", "trend"}).code == 2);
}

TEST_CASE("gradcheck command") {
  auto a = run({"gradcheck", "--seed", "1"});
  auto b = run({"gradcheck", "--seed", "1"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("optm_local_cell") != std::string::npos);
  CHECK(run({"gradcheck", "--perturb", "0.1"}).code != 0);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"benchmark", "--units", "many"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}
