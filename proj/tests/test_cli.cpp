#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mpath/cli.hpp"

namespace fs = std::filesystem;
using mpath::cli::run;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("cli_test_tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all("cli_test_tmp"); }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path.string() : (path / child).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_tiny_config(const std::string& path, int n_samples) {
  nlohmann::json j;
  j["corpus.n_samples"] = n_samples;
  j["corpus.d_v"] = 24;
  j["corpus.noise_sigma"] = 0.0;
  j["model.h"] = 24;
  j["model.L_p"] = 2;
  j["model.d"] = 16;
  j["model.n_heads"] = 2;
  j["model.ffn_dim"] = 32;
  j["model.max_len"] = 40;
  j["train.warmup_steps"] = 20;
  j["train.lr"] = 0.001;
  j["seed"] = 11;
  std::ofstream f(path);
  f << j.dump(2);
}

int run_quiet(const std::vector<std::string>& args) {
  std::ostringstream sink;
  auto* old = std::cerr.rdbuf(sink.rdbuf());
  const int rc = run(args);
  std::cerr.rdbuf(old);
  return rc;
}

}  // namespace

TEST_CASE("score subcommand emits a perfect breakdown for identical strings") {
  std::ostringstream captured;
  auto* old = std::cout.rdbuf(captured.rdbuf());
  const int rc = run({"score", "--generated", "Lung, biopsy; Adenocarcinoma", "--reference",
                      "Lung, biopsy; Adenocarcinoma"});
  std::cout.rdbuf(old);
  REQUIRE(rc == 0);
  const auto j = nlohmann::json::parse(captured.str());
  CHECK(j.at("composite").get<double>() == 1.0);
  CHECK(j.at("bleu4").get<double>() == 1.0);
}

TEST_CASE("usage errors exit with 1, data errors with 2") {
  CHECK(run_quiet({"no-such-command"}) == 1);
  CHECK(run_quiet({"gen-data", "--definitely-not-a-flag"}) == 1);
  CHECK(run_quiet({"train", "--corpus", "missing_corpus.jsonl"}) == 2);
  CHECK(run_quiet({"generate", "--checkpoint", "missing.ckpt", "--corpus", "x.jsonl"}) == 2);
}

TEST_CASE("gen-data is deterministic and honors flag overrides") {
  TempDir tmp("gendata");
  write_tiny_config(tmp.str("cfg.json"), 30);
  REQUIRE(run_quiet({"gen-data", "--config", tmp.str("cfg.json"), "--out-dir",
                     tmp.str("a")}) == 0);
  REQUIRE(run_quiet({"gen-data", "--config", tmp.str("cfg.json"), "--out-dir",
                     tmp.str("b")}) == 0);
  const auto a = slurp(tmp.str("a/corpus.jsonl"));
  CHECK(a == slurp(tmp.str("b/corpus.jsonl")));
  CHECK(std::count(a.begin(), a.end(), '\n') == 30);

  // flags win over the config file
  REQUIRE(run_quiet({"gen-data", "--config", tmp.str("cfg.json"), "--n", "12", "--out-dir",
                     tmp.str("c")}) == 0);
  const auto c = slurp(tmp.str("c/corpus.jsonl"));
  CHECK(std::count(c.begin(), c.end(), '\n') == 12);
}

TEST_CASE("unknown config keys are usage errors") {
  TempDir tmp("badcfg");
  {
    std::ofstream f(tmp.str("bad.json"));
    f << R"({"train.does_not_exist": 3})";
  }
  CHECK(run_quiet({"gen-data", "--config", tmp.str("bad.json")}) == 1);
}

TEST_CASE("full pipeline: gen-data, pretrain, train, generate, evaluate") {
  TempDir tmp("pipeline");
  write_tiny_config(tmp.str("cfg.json"), 30);
  const std::string cfg = tmp.str("cfg.json");
  REQUIRE(run_quiet({"gen-data", "--config", cfg, "--out-dir", tmp.str()}) == 0);
  REQUIRE(run_quiet({"pretrain", "--config", cfg, "--corpus", tmp.str("corpus.jsonl"),
                     "--steps", "40", "--out-dir", tmp.str()}) == 0);
  REQUIRE(run_quiet({"train", "--config", cfg, "--corpus", tmp.str("corpus.jsonl"), "--init",
                     tmp.str("backbone.ckpt"), "--epochs", "2", "--patience", "1",
                     "--out-dir", tmp.str()}) == 0);
  CHECK(fs::exists(tmp.str("model.ckpt")));
  const auto history = slurp(tmp.str("history.jsonl"));
  CHECK(std::count(history.begin(), history.end(), '\n') >= 1);
  const auto first = nlohmann::json::parse(history.substr(0, history.find('\n')));
  for (const char* key : {"epoch", "train_loss", "val_bleu", "val_rouge", "val_key", "val_emb",
                          "val_composite", "lr"}) {
    CHECK(first.contains(key));
  }

  REQUIRE(run_quiet({"generate", "--checkpoint", tmp.str("model.ckpt"), "--corpus",
                     tmp.str("corpus.jsonl"), "--out-dir", tmp.str()}) == 0);
  REQUIRE(run_quiet({"evaluate", "--pairs", tmp.str("generated.jsonl"), "--out-dir",
                     tmp.str()}) == 0);
  const auto metrics = nlohmann::json::parse(slurp(tmp.str("metrics.json")));
  CHECK(metrics.at("pairs").size() == 30);
  const double composite = metrics.at("mean").at("composite").get<double>();
  CHECK(composite >= 0.0);
  CHECK(composite <= 1.0);
  CHECK(metrics.at("backend").at("emb").get<std::string>() == "trigram");
  CHECK(metrics.at("backend").at("lexicon").get<std::string>().size() == 64);

  // join form of evaluate agrees with the pairs form
  REQUIRE(run_quiet({"evaluate", "--generated", tmp.str("generated.jsonl"), "--corpus",
                     tmp.str("corpus.jsonl"), "--out-dir", tmp.str("join")}) == 0);
  const auto joined = nlohmann::json::parse(slurp(tmp.str("join/metrics.json")));
  CHECK(joined.at("mean") == metrics.at("mean"));

  // model embedding backend runs against a checkpoint
  REQUIRE(run_quiet({"evaluate", "--pairs", tmp.str("generated.jsonl"), "--emb-backend",
                     "model", "--emb-checkpoint", tmp.str("model.ckpt"), "--out-dir",
                     tmp.str("embm")}) == 0);
  const auto embm = nlohmann::json::parse(slurp(tmp.str("embm/metrics.json")));
  CHECK(embm.at("backend").at("emb").get<std::string>() == "model");

  // unknown backend id is a usage error
  CHECK(run_quiet({"evaluate", "--pairs", tmp.str("generated.jsonl"), "--emb-backend", "bogus",
                   "--out-dir", tmp.str("bad")}) == 1);
}

TEST_CASE("cv runs deterministically") {
  TempDir tmp("cv");
  write_tiny_config(tmp.str("cfg.json"), 24);
  const std::string cfg = tmp.str("cfg.json");
  REQUIRE(run_quiet({"gen-data", "--config", cfg, "--out-dir", tmp.str()}) == 0);
  const std::vector<std::string> cv_args = {
      "cv",       "--config",         cfg,  "--corpus", tmp.str("corpus.jsonl"),
      "--folds",  "2",                "--epochs", "1",  "--patience", "1",
      "--pretrain-steps", "15"};
  auto with_out = [&](const std::string& dir) {
    auto args = cv_args;
    args.push_back("--out-dir");
    args.push_back(tmp.str(dir));
    return args;
  };
  REQUIRE(run_quiet(with_out("r1")) == 0);
  REQUIRE(run_quiet(with_out("r2")) == 0);
  CHECK(slurp(tmp.str("r1/cv_report.json")) == slurp(tmp.str("r2/cv_report.json")));
  CHECK(slurp(tmp.str("r1/fold0.ckpt")) == slurp(tmp.str("r2/fold0.ckpt")));
  CHECK(slurp(tmp.str("r1/fold1.ckpt")) == slurp(tmp.str("r2/fold1.ckpt")));
  const auto report = nlohmann::json::parse(slurp(tmp.str("r1/cv_report.json")));
  CHECK(report.at("folds").size() == 2);
  CHECK(report.contains("mean_composite"));
  CHECK(report.contains("sd_composite"));
}
