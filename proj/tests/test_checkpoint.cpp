#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "mpath/checkpoint.hpp"

using namespace mpath;

namespace {

struct Setup {
  ModelConfig cfg;
  Vocab vocab;
  ModelStateF state;
};

Setup make_setup() {
  Setup s;
  std::vector<std::string> texts = {"Lung, biopsy; Adenocarcinoma"};
  s.vocab = build_vocab(texts, 1);
  s.cfg.d_v = 6;
  s.cfg.h = 8;
  s.cfg.L_p = 2;
  s.cfg.d = 4;
  s.cfg.n_enc_layers = 1;
  s.cfg.n_dec_layers = 1;
  s.cfg.n_heads = 2;
  s.cfg.ffn_dim = 8;
  s.cfg.vocab_size = s.vocab.size();
  s.cfg.n_sample_types = 2;
  s.cfg.n_findings = 3;
  s.state = init_model_state(s.cfg, 77);
  // mark the backbone frozen so the flag round-trip is meaningful
  for (auto& [name, p] : s.state.params) {
    if (is_backbone_param(name)) s.state.set_frozen(name, true);
  }
  return s;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  auto s = make_setup();
  const std::string path = "ckpt_roundtrip.bin";
  save_checkpoint(path, s.state, s.cfg, s.vocab);
  const auto loaded = load_checkpoint(path);

  CHECK(loaded.config.d_v == s.cfg.d_v);
  CHECK(loaded.config.prompt_text == s.cfg.prompt_text);
  CHECK(loaded.vocab.id_to_token == s.vocab.id_to_token);
  REQUIRE(loaded.state.params.size() == s.state.params.size());
  for (const auto& [name, p] : s.state.params) {
    const auto& q = loaded.state.params.at(name);
    CHECK(q.frozen == p.frozen);
    CHECK(q.value.shape() == p.value.shape());
    const auto a = p.value.data();
    const auto b = q.value.data();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  std::remove(path.c_str());
}

TEST_CASE("save load save produces byte-identical files") {
  auto s = make_setup();
  save_checkpoint("ckpt_a.bin", s.state, s.cfg, s.vocab);
  auto loaded = load_checkpoint("ckpt_a.bin");
  save_checkpoint("ckpt_b.bin", loaded.state, loaded.config, loaded.vocab);
  CHECK(slurp("ckpt_a.bin") == slurp("ckpt_b.bin"));
  std::remove("ckpt_a.bin");
  std::remove("ckpt_b.bin");
}

TEST_CASE("corrupt magic is rejected with the file named") {
  auto s = make_setup();
  const std::string path = "ckpt_magic.bin";
  save_checkpoint(path, s.state, s.cfg, s.vocab);
  auto bytes = slurp(path);
  bytes[0] = 'X';
  spit(path, bytes);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("ckpt_magic.bin"),
                       CheckpointError);
  std::remove(path.c_str());
}

TEST_CASE("unsupported version is rejected") {
  auto s = make_setup();
  const std::string path = "ckpt_ver.bin";
  save_checkpoint(path, s.state, s.cfg, s.vocab);
  auto bytes = slurp(path);
  bytes[4] = 9;
  spit(path, bytes);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), CheckpointError);
  std::remove(path.c_str());
}

TEST_CASE("truncated payload is rejected") {
  auto s = make_setup();
  const std::string path = "ckpt_trunc.bin";
  save_checkpoint(path, s.state, s.cfg, s.vocab);
  auto bytes = slurp(path);
  bytes.resize(bytes.size() - 64);
  spit(path, bytes);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  std::remove(path.c_str());
}

TEST_CASE("missing file is a checkpoint error") {
  CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint.bin"), CheckpointError);
}
