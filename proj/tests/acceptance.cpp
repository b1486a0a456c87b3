// Acceptance suite: one line per criterion, nonzero exit when any fails.
// The end-to-end run (A3) dominates the runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "metric_oracles.hpp"
#include "mpath/checkpoint.hpp"
#include "mpath/cli.hpp"
#include "mpath/grad_check.hpp"
#include "mpath/metrics.hpp"
#include "mpath/model.hpp"
#include "mpath/reports.hpp"
#include "mpath/training.hpp"

namespace fs = std::filesystem;
using namespace mpath;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Criterion = std::function<Outcome()>;

bool report(const char* name, const Criterion& fn) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const auto secs =
      std::chrono::duration_cast<std::chrono::duration<double>>(
          std::chrono::steady_clock::now() - start)
          .count();
  std::printf("%s %s (%s) [%.1fs]\n", name, out.pass ? "PASS" : "FAIL", out.detail.c_str(),
              secs);
  std::fflush(stdout);
  return out.pass;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

TensorD rand_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(size_t(numel_of(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TensorD::from_vector(std::move(shape), std::move(v));
}

// ---- A1: gradient suite ----------------------------------------------------

ModelConfig tiny_model_config(int64_t vocab_size) {
  ModelConfig cfg;
  cfg.d_v = 10;
  cfg.h = 8;
  cfg.L_p = 2;
  cfg.d = 8;
  cfg.n_enc_layers = 1;
  cfg.n_dec_layers = 1;
  cfg.n_heads = 2;
  cfg.ffn_dim = 12;
  cfg.vocab_size = vocab_size;
  cfg.max_len = 16;
  cfg.n_sample_types = 3;
  cfg.n_findings = 4;
  cfg.prompt_dropout = 0.0;
  return cfg;
}

Outcome run_a1() {
  int cases = 0;
  double worst = 0.0;
  const GradCheckOptions opt{1e-5, 1e-4, -1, 99};

  auto sweep = [&](auto&& make_case) {
    for (uint64_t seed = 0; seed < 3; ++seed) {
      Rng rng(seed * 31 + 7);
      auto [build, params] = make_case(rng);
      const auto rep = grad_check(build, params, opt);
      worst = std::max(worst, rep.worst);
      ++cases;
      if (!rep.all_pass) throw std::runtime_error("primitive gradient check failed");
    }
  };
  using Params = std::vector<std::pair<std::string, TensorD>>;
  using B = std::function<TensorD(GraphD&)>;

  sweep([](Rng& rng) {
    auto a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 2}, rng);
    return std::pair{B([a, b](GraphD& g) { return g.mean_all(g.matmul(a, b)); }),
                     Params{{"a", a}, {"b", b}}};
  });
  sweep([](Rng& rng) {
    auto a = rand_tensor({3, 4}, rng), b = rand_tensor({3, 4}, rng), c = rand_tensor({4, 2}, rng);
    return std::pair{B([a, b, c](GraphD& g) { return g.mean_all(g.matmul(g.add(a, b), c)); }),
                     Params{{"a", a}, {"b", b}}};
  });
  sweep([](Rng& rng) {
    auto x = rand_tensor({3, 4}, rng), v = rand_tensor({4}, rng), c = rand_tensor({4, 2}, rng);
    return std::pair{
        B([x, v, c](GraphD& g) { return g.mean_all(g.matmul(g.add_row(x, v), c)); }),
        Params{{"x", x}, {"v", v}}};
  });
  sweep([](Rng& rng) {
    auto x = rand_tensor({3, 4}, rng), c = rand_tensor({4, 2}, rng);
    const double s = rng.uniform(0.5, 2.0);
    return std::pair{
        B([x, c, s](GraphD& g) { return g.mean_all(g.matmul(g.scale(x, s), c)); }),
        Params{{"x", x}}};
  });
  sweep([](Rng& rng) {
    std::vector<double> v(12);
    for (auto& x : v) {
      do {
        x = rng.uniform(-2, 2);
      } while (std::abs(x) < 1e-3);
    }
    auto x = TensorD::from_vector({3, 4}, std::move(v));
    auto c = rand_tensor({4, 2}, rng);
    return std::pair{B([x, c](GraphD& g) { return g.mean_all(g.matmul(g.relu(x), c)); }),
                     Params{{"x", x}}};
  });
  sweep([](Rng& rng) {
    auto x = rand_tensor({3, 5}, rng), c = rand_tensor({5, 2}, rng);
    return std::pair{
        B([x, c](GraphD& g) { return g.mean_all(g.matmul(g.softmax_rows(x), c)); }),
        Params{{"x", x}}};
  });
  sweep([](Rng& rng) {
    auto x = rand_tensor({3, 5}, rng);
    auto gain = rand_tensor({5}, rng, 0.5, 1.5), bias = rand_tensor({5}, rng, -0.5, 0.5);
    auto c = rand_tensor({5, 2}, rng);
    return std::pair{B([x, gain, bias, c](GraphD& g) {
                       return g.mean_all(g.matmul(g.layer_norm(x, gain, bias), c));
                     }),
                     Params{{"x", x}, {"g", gain}, {"b", bias}}};
  });
  sweep([](Rng& rng) {
    auto table = rand_tensor({5, 3}, rng);
    auto c = rand_tensor({3, 2}, rng);
    std::vector<int32_t> ids = {0, 2, 2, int32_t(rng.below(5))};
    return std::pair{
        B([table, c, ids](GraphD& g) { return g.mean_all(g.matmul(g.embedding(table, ids), c)); }),
        Params{{"table", table}}};
  });
  sweep([](Rng& rng) {
    auto x = rand_tensor({2, 6}, rng), c = rand_tensor({4, 2}, rng);
    return std::pair{
        B([x, c](GraphD& g) { return g.mean_all(g.matmul(g.reshape(x, {3, 4}), c)); }),
        Params{{"x", x}}};
  });
  sweep([](Rng& rng) {
    auto a = rand_tensor({2, 4}, rng), b = rand_tensor({3, 4}, rng), c = rand_tensor({4, 2}, rng);
    return std::pair{
        B([a, b, c](GraphD& g) { return g.mean_all(g.matmul(g.concat_rows(a, b), c)); }),
        Params{{"a", a}, {"b", b}}};
  });
  sweep([](Rng& rng) {
    auto a = rand_tensor({3, 2}, rng), b = rand_tensor({3, 3}, rng), c = rand_tensor({5, 2}, rng);
    return std::pair{
        B([a, b, c](GraphD& g) { return g.mean_all(g.matmul(g.concat_cols(a, b), c)); }),
        Params{{"a", a}, {"b", b}}};
  });
  sweep([](Rng& rng) {
    auto x = rand_tensor({3, 6}, rng), c = rand_tensor({3, 2}, rng);
    return std::pair{
        B([x, c](GraphD& g) { return g.mean_all(g.matmul(g.slice_cols(x, 1, 4), c)); }),
        Params{{"x", x}}};
  });
  sweep([](Rng& rng) {
    auto x = rand_tensor({3, 4}, rng), c = rand_tensor({3, 2}, rng);
    return std::pair{
        B([x, c](GraphD& g) { return g.mean_all(g.matmul(g.transpose(x), c)); }),
        Params{{"x", x}}};
  });
  sweep([](Rng& rng) {
    auto x = rand_tensor({3, 4}, rng);
    return std::pair{B([x](GraphD& g) { return g.scale(g.mean_all(x), 2.5); }),
                     Params{{"x", x}}};
  });
  sweep([](Rng& rng) {
    auto logits = rand_tensor({4, 6}, rng, -3, 3);
    std::vector<int32_t> targets = {2, -1, int32_t(rng.below(6)), 5};
    return std::pair{B([logits, targets](GraphD& g) {
                       return g.cross_entropy(logits, targets, -1);
                     }),
                     Params{{"logits", logits}}};
  });
  sweep([](Rng& rng) {
    auto logits = rand_tensor({6}, rng, -3, 3);
    std::vector<float> targets;
    for (int i = 0; i < 6; ++i) targets.push_back(rng.uniform() < 0.5 ? 0.f : 1.f);
    return std::pair{B([logits, targets](GraphD& g) { return g.bce_logits(logits, targets); }),
                     Params{{"logits", logits}}};
  });

  // full prompt-encoder + backbone forward pass, 64-bit, sampled coordinates
  {
    std::vector<std::string> texts = {"Lung, biopsy; Adenocarcinoma",
                                      "Colon, polypectomy; Hyperplastic polyp",
                                      "Breast, core-needle biopsy; Fibroadenoma"};
    const auto vocab = build_vocab(texts, 1);
    auto cfg = tiny_model_config(vocab.size());
    for (uint64_t seed = 0; seed < 4; ++seed) {
      auto fstate = init_model_state(cfg, seed + 3);
      auto dstate = cast_state<double>(fstate);
      Rng frng(seed);
      std::vector<PairedSample> batch;
      for (int i = 0; i < 2; ++i) {
        PairedSample p;
        p.id = "a";
        p.report_text = texts[size_t(i)];
        p.labels.organ_id = int32_t(i);
        p.labels.sample_type_id = int32_t(i % 3);
        p.labels.finding_ids = {int32_t(i % 4)};
        for (int64_t j = 0; j < cfg.d_v; ++j) p.features.push_back(float(frng.uniform(-1, 1)));
        batch.push_back(std::move(p));
      }
      auto build = [&](GraphD& g) {
        Rng rng(1);
        return forward_loss(g, batch, dstate, cfg, vocab, rng);
      };
      std::vector<std::pair<std::string, TensorD>> params;
      for (auto& [name, p] : dstate.params) params.emplace_back(name, p.value);
      GradCheckOptions model_opt{1e-5, 1e-4, 5, seed * 17 + 5};
      const auto rep = grad_check(build, params, model_opt);
      worst = std::max(worst, rep.worst);
      ++cases;
      if (!rep.all_pass) throw std::runtime_error("full-model gradient check failed");
    }
  }

  Outcome out;
  out.pass = cases >= 50 && worst < 1e-4;
  out.detail = std::to_string(cases) + " cases, max rel err " + fmt(worst);
  return out;
}

// ---- A2: frozen-backbone invariance ----------------------------------------

Outcome run_a2() {
  CorpusConfig ccfg;
  ccfg.n_samples = 64;
  ccfg.d_v = 768;
  ccfg.noise_sigma = 0.0;
  ccfg.seed = 7;
  ccfg.taxonomy = Taxonomy::load(default_taxonomy_path());
  const auto corpus = synthesize_corpus(ccfg);

  std::vector<std::string> texts;
  for (const auto& s : corpus) texts.push_back(s.report_text);
  texts.push_back("Pathology report:");
  const auto vocab = build_vocab(texts, 1);

  ModelConfig mcfg;
  mcfg.vocab_size = vocab.size();
  mcfg.n_sample_types = ccfg.taxonomy.n_sample_types();
  mcfg.n_findings = ccfg.taxonomy.n_findings();
  auto state = init_backbone_pretrain(texts, vocab, mcfg, 50, 7);

  const auto before = frozen_params_sha256(state);
  TrainConfig tcfg;
  OptState opt;
  Rng rng(3);
  size_t cursor = 0;
  for (int step = 0; step < 200; ++step) {
    std::vector<PairedSample> batch;
    for (int64_t b = 0; b < tcfg.batch_size; ++b) {
      batch.push_back(corpus[cursor]);
      cursor = (cursor + 1) % corpus.size();
    }
    GraphF g;
    auto loss = forward_loss(g, batch, state, mcfg, vocab, rng);
    state.zero_grads();
    g.backward(loss);
    state.ensure_trainable_grads();
    adamw_step(state, opt, lr_at_step(opt.t + 1, tcfg), tcfg);
  }
  const auto after = frozen_params_sha256(state);

  Outcome out;
  out.pass = before == after;
  out.detail = "sha256 " + before.substr(0, 12) + (out.pass ? " unchanged" : " CHANGED") +
               " after 200 steps";
  return out;
}

// ---- A3: end-to-end learning -----------------------------------------------

double organ_accuracy(std::span<const PairedSample> samples,
                      const std::vector<std::string>& generations) {
  int hits = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& text = generations[i];
    const size_t comma = text.find(',');
    if (comma == std::string::npos) continue;
    const auto organ = parse_organ_name(text.substr(0, comma));
    if (organ && int32_t(*organ) == samples[i].labels.organ_id) ++hits;
  }
  return samples.empty() ? 0.0 : double(hits) / double(samples.size());
}

Outcome run_a3() {
  CorpusConfig ccfg;
  ccfg.n_samples = 1000;
  ccfg.d_v = 768;
  ccfg.noise_sigma = 0.0;
  ccfg.seed = 7;
  ccfg.taxonomy = Taxonomy::load(default_taxonomy_path());
  const auto corpus = synthesize_corpus(ccfg);

  ModelConfig mcfg;  // shipped defaults: d_v 768, h 512, L_p 8, d 64
  mcfg.n_sample_types = ccfg.taxonomy.n_sample_types();
  mcfg.n_findings = ccfg.taxonomy.n_findings();

  std::vector<std::string> texts;
  for (const auto& s : corpus) texts.push_back(s.report_text);
  texts.push_back(mcfg.prompt_text);
  const auto vocab = build_vocab(texts, 1);
  mcfg.vocab_size = vocab.size();
  texts.pop_back();

  PretrainStats stats;
  const auto backbone = init_backbone_pretrain(texts, vocab, mcfg, 3000, 7, &stats);
  const bool pretrain_halved = stats.final_loss < 0.5 * stats.initial_loss;

  // held-out 100 samples
  std::vector<PairedSample> train_set(corpus.begin(), corpus.end() - 100);
  std::vector<PairedSample> heldout(corpus.end() - 100, corpus.end());

  ScoreContext ctx{KeywordLexicon::load(default_lexicon_path()), EmbBackend::kTrigram, nullptr};
  TrainConfig tcfg;  // lr 1e-4, batch 8, patience 20, max 100 epochs
  tcfg.seed = 7;
  const auto result = train_fold(train_set, heldout, backbone, mcfg, tcfg, ctx, vocab);

  std::vector<std::string> generations;
  const auto score = evaluate_generations(heldout, result.best_state, mcfg, vocab, ctx,
                                          &generations);
  const double organ_acc = organ_accuracy(heldout, generations);

  int exact = 0;
  for (size_t i = 0; i < heldout.size(); ++i) {
    if (encode(generations[i], vocab, false) == encode(heldout[i].report_text, vocab, false)) {
      ++exact;
    }
  }
  const double exact_rate = double(exact) / double(heldout.size());

  // conditioning sensitivity: across held-out pairs with different organ
  // labels, the generated organ tokens must differ
  auto parsed_organ = [](const std::string& text) -> std::optional<Organ> {
    const size_t comma = text.find(',');
    if (comma == std::string::npos) return std::nullopt;
    return parse_organ_name(text.substr(0, comma));
  };
  int64_t diff_pairs = 0, diff_hits = 0;
  for (size_t i = 0; i < heldout.size(); ++i) {
    for (size_t j = i + 1; j < heldout.size(); ++j) {
      if (heldout[i].labels.organ_id == heldout[j].labels.organ_id) continue;
      ++diff_pairs;
      const auto a = parsed_organ(generations[i]);
      const auto b = parsed_organ(generations[j]);
      if (a && b && *a != *b) ++diff_hits;
    }
  }
  const double conditioning = diff_pairs ? double(diff_hits) / double(diff_pairs) : 0.0;

  // ablation: zeroed prefix at inference
  GenerateOptions ablate;
  ablate.prompt_text = mcfg.prompt_text;
  ablate.max_len = mcfg.max_len;
  ablate.zero_prefix = true;
  std::vector<std::string> ablated;
  for (const auto& s : heldout) {
    ablated.push_back(generate(s.features, result.best_state, mcfg, vocab, ablate));
  }
  const double ablated_acc = organ_accuracy(heldout, ablated);

  Outcome out;
  out.pass = score.composite >= 0.95 && organ_acc >= 0.95 && ablated_acc <= 0.30 &&
             exact_rate >= 0.9 && pretrain_halved && conditioning >= 0.95;
  out.detail = "composite " + fmt(score.composite) + ", organ acc " + fmt(organ_acc) +
               ", exact " + fmt(exact_rate) + ", ablated organ acc " + fmt(ablated_acc) +
               ", conditioning " + fmt(conditioning) + ", pretrain " +
               fmt(stats.initial_loss) + "->" + fmt(stats.final_loss) + ", best epoch " +
               std::to_string(result.best_epoch) + "/" + std::to_string(result.history.size());
  return out;
}

// ---- A4: metric oracles ------------------------------------------------------

Outcome run_a4() {
  Rng rng(404);
  static const char* words[] = {"lung",  "colon",  "biopsy", "carcinoma",
                                "grade", "chronic", "tissue", "adenoma"};
  auto random_text = [&](size_t max_len) {
    const size_t len = rng.below(max_len + 1);
    std::string out;
    for (size_t i = 0; i < len; ++i) {
      if (i) out += " ";
      out += words[rng.below(8)];
    }
    return out;
  };

  int cases = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 120; ++rep) {
    const auto cand = random_text(8);
    const auto ref = random_text(8);
    worst = std::max(worst, std::abs(bleu4(cand, ref) - oracle::bleu4_bruteforce(cand, ref)));
    worst = std::max(worst,
                     std::abs(rouge_l_f1(cand, ref) - oracle::rouge_l_bruteforce(cand, ref)));
    ++cases;
  }
  for (const auto& pair : fixtures::kReportPairs) {
    worst = std::max(worst, std::abs(bleu4(pair.generated, pair.reference) -
                                     oracle::bleu4_bruteforce(pair.generated, pair.reference)));
    worst = std::max(worst, std::abs(rouge_l_f1(pair.generated, pair.reference) -
                                     oracle::rouge_l_recursive(pair.generated, pair.reference)));
    ++cases;
  }

  bool grid_exact = true;
  const double grid[3] = {0.0, 0.4, 1.0};
  for (double b : grid) {
    for (double r : grid) {
      for (double k : grid) {
        for (double e : grid) {
          const double expected = 0.15 * (r + b) + 0.4 * k + 0.3 * e;
          grid_exact = grid_exact && composite_score(b, r, k, e) == expected;
        }
      }
    }
  }

  Outcome out;
  out.pass = cases >= 100 && worst < 1e-9 && grid_exact;
  out.detail = std::to_string(cases) + " pairs, max oracle gap " + fmt(worst) +
               (grid_exact ? ", 81-point grid exact" : ", grid MISMATCH");
  return out;
}

// ---- A5: perfect-match property ----------------------------------------------

Outcome run_a5() {
  const auto tax = Taxonomy::load(default_taxonomy_path());
  ScoreContext ctx{KeywordLexicon::load(default_lexicon_path()), EmbBackend::kTrigram, nullptr};
  Rng rng(505);
  int perfect = 0;
  const int n = 500;
  for (int i = 0; i < n; ++i) {
    StructuredReport r;
    r.organ = static_cast<Organ>(rng.below(kNumOrgans));
    const auto& sts = tax.sample_types_by_organ[size_t(r.organ)];
    const auto& fds = tax.findings_by_organ[size_t(r.organ)];
    r.sample_type = sts[rng.below(sts.size())];
    const size_t nf = 1 + rng.below(3);
    std::set<size_t> chosen;
    while (chosen.size() < std::min(nf, fds.size())) chosen.insert(rng.below(fds.size()));
    for (size_t f : chosen) r.findings.push_back(fds[f]);
    if (rng.uniform() < 0.2) r.note = "The specimen includes muscle proper.";
    const auto text = render_report(r);
    const auto s = score_pair(text, text, ctx);
    if (s.composite == 1.0 && s.bleu4 == 1.0 && s.rouge_l_f1 == 1.0 && s.key == 1.0 &&
        s.emb == 1.0) {
      ++perfect;
    }
  }
  Outcome out;
  out.pass = perfect == n;
  out.detail = std::to_string(perfect) + "/" + std::to_string(n) + " self-scores exactly 1.0";
  return out;
}

// ---- A6: prompt dropout frequency ---------------------------------------------

Outcome run_a6() {
  ModelConfig cfg;
  cfg.prompt_dropout = 0.2;
  Rng rng(606);
  const int n = 100000;
  int empty = 0;
  for (int i = 0; i < n; ++i) {
    if (sample_prompt(rng, cfg).empty()) ++empty;
  }
  const double frac = double(empty) / double(n);
  Outcome out;
  out.pass = frac >= 0.196 && frac <= 0.204;
  out.detail = "empty fraction " + fmt(frac) + " of " + std::to_string(n) + " draws";
  return out;
}

// ---- A7: early stopping fixtures ----------------------------------------------

Outcome run_a7() {
  struct Fixture {
    std::vector<double> curve;
    int64_t patience;
    int64_t expect_stop;
    int64_t expect_best;
  };
  const std::vector<Fixture> fixtures = {
      {{0.1, 0.2, 0.3, 0.3, 0.3, 0.3, 0.3}, 2, 5, 3},
      {{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}, 2, -1, 10},  // never stops
      {{0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, 3, 4, 1},
  };
  bool ok = true;
  std::string detail;
  for (size_t fi = 0; fi < fixtures.size(); ++fi) {
    const auto& fx = fixtures[fi];
    EarlyStopper stop(fx.patience);
    // mirror of the train_fold bookkeeping: snapshot on improvement
    int64_t best_snapshot = 0;
    double best = -1.0;
    int64_t stopped_at = -1;
    for (size_t e = 1; e <= fx.curve.size(); ++e) {
      const double score = fx.curve[e - 1];
      if (score > best) {
        best = score;
        best_snapshot = int64_t(e);
      }
      if (stop.observe(int64_t(e), score)) {
        stopped_at = int64_t(e);
        break;
      }
    }
    const bool this_ok =
        stopped_at == fx.expect_stop && stop.best_epoch() == fx.expect_best &&
        best_snapshot == fx.expect_best;
    ok = ok && this_ok;
    if (!detail.empty()) detail += ", ";
    detail += "curve" + std::to_string(fi + 1) + (this_ok ? " ok" : " WRONG");
  }
  return {ok, detail};
}

// ---- A8: determinism & persistence ----------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("missing " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

Outcome run_a8() {
  const fs::path root = "acceptance_tmp";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto cfg_path = (root / "cfg.json").string();
  {
    nlohmann::json j;
    j["corpus.n_samples"] = 200;
    j["corpus.d_v"] = 64;
    j["corpus.noise_sigma"] = 0.0;
    j["model.h"] = 32;
    j["model.L_p"] = 2;
    j["model.d"] = 16;
    j["model.n_heads"] = 2;
    j["model.ffn_dim"] = 32;
    j["model.max_len"] = 40;
    j["train.warmup_steps"] = 20;
    std::ofstream f(cfg_path);
    f << j.dump();
  }
  std::ostringstream sink;
  auto* old = std::cerr.rdbuf(sink.rdbuf());
  auto cli_run = [&](std::vector<std::string> args) {
    const int rc = mpath::cli::run(args);
    if (rc != 0) {
      std::cerr.rdbuf(old);
      throw std::runtime_error("cli exit " + std::to_string(rc));
    }
  };
  cli_run({"gen-data", "--config", cfg_path, "--out-dir", root.string()});
  const auto corpus_path = (root / "corpus.jsonl").string();
  for (const char* dir : {"r1", "r2"}) {
    cli_run({"cv", "--config", cfg_path, "--corpus", corpus_path, "--folds", "5", "--seed",
             "7", "--epochs", "2", "--patience", "1", "--pretrain-steps", "40", "--out-dir",
             (root / dir).string()});
  }
  std::cerr.rdbuf(old);

  bool identical = slurp((root / "r1/cv_report.json").string()) ==
                   slurp((root / "r2/cv_report.json").string());
  for (int f = 0; f < 5; ++f) {
    const auto name = "fold" + std::to_string(f) + ".ckpt";
    identical = identical && slurp((root / "r1" / name).string()) ==
                                 slurp((root / "r2" / name).string());
    const auto hist = "history_fold" + std::to_string(f) + ".jsonl";
    identical = identical && slurp((root / "r1" / hist).string()) ==
                                 slurp((root / "r2" / hist).string());
  }

  // checkpoint save/load round trip is bit-exact
  const auto fold0 = (root / "r1/fold0.ckpt").string();
  auto loaded = load_checkpoint(fold0);
  const auto resaved = (root / "resaved.ckpt").string();
  save_checkpoint(resaved, loaded.state, loaded.config, loaded.vocab);
  const bool roundtrip = slurp(fold0) == slurp(resaved);

  fs::remove_all(root);
  Outcome out;
  out.pass = identical && roundtrip;
  out.detail = std::string(identical ? "two cv runs byte-identical" : "cv runs DIFFER") +
               (roundtrip ? ", checkpoint round trip bit-exact" : ", round trip BROKEN");
  return out;
}

// ---- A9: fixture parsing and hallucination penalty --------------------------------

Outcome run_a9() {
  const auto lex = KeywordLexicon::load(default_lexicon_path());
  ScoreContext ctx{lex, EmbBackend::kTrigram, nullptr};

  int parsed = 0;
  for (const auto& pair : fixtures::kReportPairs) {
    parse_report(pair.reference);
    parse_report(pair.generated);
    parsed += 2;
  }

  const auto& bladder = fixtures::kReportPairs[fixtures::kBladderPairIndex];
  const auto gt = parse_report(bladder.reference);
  const auto gen = parse_report(bladder.generated);
  const bool header_match = gt.organ == gen.organ && gt.sample_type == gen.sample_type;
  const auto breakdown = score_pair(bladder.generated, bladder.reference, ctx);

  Outcome out;
  out.pass = parsed == 10 && header_match && breakdown.key < 1.0;
  out.detail = std::to_string(parsed) + "/10 fixtures parse, bladder KEY " +
               fmt(breakdown.key) + (header_match ? ", header fields match" : ", header DIFFERS");
  return out;
}

}  // namespace

int main() {
  bool all = true;
  all &= report("A1 gradient-suite              ", run_a1);
  all &= report("A2 frozen-backbone-invariance  ", run_a2);
  all &= report("A3 end-to-end-learning         ", run_a3);
  all &= report("A4 metric-oracles              ", run_a4);
  all &= report("A5 perfect-match-property      ", run_a5);
  all &= report("A6 prompt-dropout-frequency    ", run_a6);
  all &= report("A7 early-stopping-fixtures     ", run_a7);
  all &= report("A8 determinism-persistence     ", run_a8);
  all &= report("A9 fixture-parsing             ", run_a9);
  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "CRITERIA FAILED");
  return all ? 0 : 1;
}
