#include "mpath/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mpath/checkpoint.hpp"
#include "mpath/metrics.hpp"
#include "mpath/model.hpp"
#include "mpath/reports.hpp"
#include "mpath/tokenizer.hpp"
#include "mpath/training.hpp"

namespace fs = std::filesystem;

namespace mpath::cli {

namespace {

void log_line(const std::string& level, const nlohmann::json& fields) {
  nlohmann::json j = fields;
  j["level"] = level;
  std::cerr << j.dump() << "\n";
}

struct RunConfig {
  // corpus synthesis
  int64_t n_samples = 1000;
  int64_t d_v = 768;
  double noise_sigma = 0.1;
  // model + training
  ModelConfig model;
  TrainConfig train;
  int64_t pretrain_steps = 3000;
  double val_frac = 0.1;
  // paths
  std::string taxonomy_path = default_taxonomy_path();
  std::string lexicon_path = default_lexicon_path();
  std::string out_dir = ".";
  std::string corpus_path;
  std::string init_path;
  std::string checkpoint_path;
  std::string pairs_path;
  std::string generated_path;
  // misc
  uint64_t seed = 7;
  std::string emb_backend = "trigram";
  std::string emb_checkpoint;
  int beam = 1;
  bool zero_prefix = false;
};

// config files are flat JSON objects with dotted keys; flags override them
void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::invalid_argument("config: bad JSON in " + path + ": " + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "corpus.n_samples") cfg.n_samples = value.get<int64_t>();
      else if (key == "corpus.d_v") cfg.d_v = value.get<int64_t>();
      else if (key == "corpus.noise_sigma") cfg.noise_sigma = value.get<double>();
      else if (key == "model.h") cfg.model.h = value.get<int64_t>();
      else if (key == "model.L_p") cfg.model.L_p = value.get<int64_t>();
      else if (key == "model.d") cfg.model.d = value.get<int64_t>();
      else if (key == "model.n_enc_layers") cfg.model.n_enc_layers = value.get<int64_t>();
      else if (key == "model.n_dec_layers") cfg.model.n_dec_layers = value.get<int64_t>();
      else if (key == "model.n_heads") cfg.model.n_heads = value.get<int64_t>();
      else if (key == "model.ffn_dim") cfg.model.ffn_dim = value.get<int64_t>();
      else if (key == "model.max_len") cfg.model.max_len = value.get<int64_t>();
      else if (key == "model.prompt_text") cfg.model.prompt_text = value.get<std::string>();
      else if (key == "model.prompt_dropout") cfg.model.prompt_dropout = value.get<double>();
      else if (key == "model.prefix_decoder_side")
        cfg.model.prefix_decoder_side = value.get<bool>();
      else if (key == "model.lambda_organ") cfg.model.lambda_organ = value.get<double>();
      else if (key == "model.lambda_sample") cfg.model.lambda_sample = value.get<double>();
      else if (key == "model.lambda_finding") cfg.model.lambda_finding = value.get<double>();
      else if (key == "train.lr") cfg.train.lr = value.get<double>();
      else if (key == "train.warmup_steps") cfg.train.warmup_steps = value.get<int64_t>();
      else if (key == "train.batch_size") cfg.train.batch_size = value.get<int64_t>();
      else if (key == "train.max_epochs") cfg.train.max_epochs = value.get<int64_t>();
      else if (key == "train.patience") cfg.train.patience = value.get<int64_t>();
      else if (key == "train.weight_decay") cfg.train.weight_decay = value.get<double>();
      else if (key == "train.n_folds") cfg.train.n_folds = value.get<int64_t>();
      else if (key == "pretrain.steps") cfg.pretrain_steps = value.get<int64_t>();
      else if (key == "val_frac") cfg.val_frac = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<uint64_t>();
      else if (key == "emb.backend") cfg.emb_backend = value.get<std::string>();
      else if (key == "paths.taxonomy") cfg.taxonomy_path = value.get<std::string>();
      else if (key == "paths.lexicon") cfg.lexicon_path = value.get<std::string>();
      else if (key == "paths.out_dir") cfg.out_dir = value.get<std::string>();
      else throw std::invalid_argument("config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config: bad value for '" + key + "': " + e.what());
    }
  }
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

Vocab build_corpus_vocab(const std::vector<PairedSample>& corpus, const std::string& prompt) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size() + 1);
  for (const auto& s : corpus) texts.push_back(s.report_text);
  if (!prompt.empty()) texts.push_back(prompt);
  return build_vocab(texts, 1);
}

ScoreContext make_score_context(const RunConfig& cfg) {
  ScoreContext ctx;
  ctx.lexicon = KeywordLexicon::load(cfg.lexicon_path);
  if (cfg.emb_backend == "trigram") {
    ctx.emb_backend = EmbBackend::kTrigram;
  } else if (cfg.emb_backend == "model") {
    ctx.emb_backend = EmbBackend::kModel;
    if (cfg.emb_checkpoint.empty()) {
      throw std::invalid_argument("emb backend 'model' needs --emb-checkpoint");
    }
    auto ckpt = std::make_shared<Checkpoint>(load_checkpoint(cfg.emb_checkpoint));
    ctx.emb_model = [ckpt](const std::string& a, const std::string& b) {
      const auto& table = ckpt->state.at("emb.tok");
      const int64_t d = table.shape()[1];
      auto pool = [&](const std::string& text) {
        std::vector<double> v(size_t(d), 0.0);
        const auto ids = encode(text, ckpt->vocab, false);
        for (int32_t id : ids) {
          for (int64_t j = 0; j < d; ++j) v[size_t(j)] += double(table.at(id, j));
        }
        if (!ids.empty()) {
          for (auto& x : v) x /= double(ids.size());
        }
        return v;
      };
      const auto va = pool(a), vb = pool(b);
      double dot = 0, na = 0, nb = 0;
      for (int64_t j = 0; j < d; ++j) {
        dot += va[size_t(j)] * vb[size_t(j)];
        na += va[size_t(j)] * va[size_t(j)];
        nb += vb[size_t(j)] * vb[size_t(j)];
      }
      if (na == 0.0 || nb == 0.0) return a == b ? 1.0 : 0.0;
      return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
    };
  } else {
    throw std::invalid_argument("unknown emb backend '" + cfg.emb_backend +
                                "' (expected trigram or model)");
  }
  return ctx;
}

void write_history(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("history: cannot write " + path);
  for (const auto& r : history) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["val_bleu"] = r.val_bleu;
    j["val_rouge"] = r.val_rouge;
    j["val_key"] = r.val_key;
    j["val_emb"] = r.val_emb;
    j["val_composite"] = r.val_composite;
    j["lr"] = r.lr;
    f << j.dump() << "\n";
  }
}

nlohmann::json breakdown_json(const ScoreBreakdown& s) {
  nlohmann::json j;
  j["bleu4"] = s.bleu4;
  j["rouge_l_f1"] = s.rouge_l_f1;
  j["key"] = s.key;
  j["emb"] = s.emb;
  j["composite"] = s.composite;
  return j;
}

// ---- subcommands ----------------------------------------------------------

int cmd_gen_data(const RunConfig& cfg) {
  CorpusConfig ccfg;
  ccfg.n_samples = cfg.n_samples;
  ccfg.d_v = cfg.d_v;
  ccfg.noise_sigma = cfg.noise_sigma;
  ccfg.seed = cfg.seed;
  ccfg.taxonomy = Taxonomy::load(cfg.taxonomy_path);
  const auto corpus = synthesize_corpus(ccfg);
  const auto path = out_path(cfg, "corpus.jsonl");
  write_corpus_jsonl(path, corpus);
  log_line("info", {{"event", "gen-data"}, {"n", corpus.size()}, {"path", path}});
  return 0;
}

ModelConfig configure_model(const RunConfig& cfg, const std::vector<PairedSample>& corpus,
                            const Taxonomy& tax, const Vocab& vocab) {
  ModelConfig m = cfg.model;
  m.d_v = int64_t(corpus.at(0).features.size());
  m.vocab_size = vocab.size();
  m.n_sample_types = tax.n_sample_types();
  m.n_findings = tax.n_findings();
  m.validate();
  return m;
}

int cmd_pretrain(const RunConfig& cfg) {
  const auto tax = Taxonomy::load(cfg.taxonomy_path);
  const auto corpus = read_corpus_jsonl(cfg.corpus_path, tax);
  if (corpus.empty()) throw std::runtime_error("pretrain: corpus is empty");
  const auto vocab = build_corpus_vocab(corpus, cfg.model.prompt_text);
  const auto mcfg = configure_model(cfg, corpus, tax, vocab);
  std::vector<std::string> texts;
  for (const auto& s : corpus) texts.push_back(s.report_text);

  PretrainStats stats;
  const auto state = init_backbone_pretrain(texts, vocab, mcfg, cfg.pretrain_steps, cfg.seed,
                                            &stats);
  const auto path = out_path(cfg, "backbone.ckpt");
  save_checkpoint(path, state, mcfg, vocab);
  log_line("info", {{"event", "pretrain"},
                    {"steps", stats.steps},
                    {"initial_loss", stats.initial_loss},
                    {"final_loss", stats.final_loss},
                    {"path", path}});
  return 0;
}

// seeded validation holdout: last ceil(n*frac) positions of a seeded shuffle
std::pair<std::vector<PairedSample>, std::vector<PairedSample>> split_train_val(
    const std::vector<PairedSample>& corpus, double frac, uint64_t seed) {
  std::vector<int64_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int64_t(i);
  Rng rng(Rng::derive(seed, 0x5eedb00cULL));
  rng.shuffle(order.begin(), order.end());
  size_t n_val = size_t(std::ceil(double(corpus.size()) * frac));
  n_val = std::clamp<size_t>(n_val, 1, corpus.size() - 1);
  std::vector<PairedSample> train, val;
  for (size_t i = 0; i < order.size(); ++i) {
    const auto& s = corpus[size_t(order[i])];
    if (i < order.size() - n_val) train.push_back(s);
    else val.push_back(s);
  }
  return {std::move(train), std::move(val)};
}

int cmd_train(const RunConfig& cfg) {
  const auto tax = Taxonomy::load(cfg.taxonomy_path);
  const auto corpus = read_corpus_jsonl(cfg.corpus_path, tax);
  if (corpus.size() < 2) throw std::runtime_error("train: corpus too small");

  ModelStateF initial;
  ModelConfig mcfg;
  Vocab vocab;
  if (!cfg.init_path.empty()) {
    auto ckpt = load_checkpoint(cfg.init_path);
    initial = std::move(ckpt.state);
    mcfg = ckpt.config;
    vocab = std::move(ckpt.vocab);
    // training-time knobs may be overridden without touching the backbone
    mcfg.prompt_dropout = cfg.model.prompt_dropout;
    mcfg.prompt_text = cfg.model.prompt_text;
  } else {
    vocab = build_corpus_vocab(corpus, cfg.model.prompt_text);
    mcfg = configure_model(cfg, corpus, tax, vocab);
    std::vector<std::string> texts;
    for (const auto& s : corpus) texts.push_back(s.report_text);
    initial = init_backbone_pretrain(texts, vocab, mcfg, cfg.pretrain_steps, cfg.seed);
  }

  const auto ctx = make_score_context(cfg);
  auto [train_set, val_set] = split_train_val(corpus, cfg.val_frac, cfg.seed);
  TrainConfig tcfg = cfg.train;
  tcfg.seed = cfg.seed;
  const auto result = train_fold(train_set, val_set, initial, mcfg, tcfg, ctx, vocab);

  const auto ckpt_path = out_path(cfg, "model.ckpt");
  save_checkpoint(ckpt_path, result.best_state, mcfg, vocab);
  write_history(out_path(cfg, "history.jsonl"), result.history);
  log_line("info", {{"event", "train"},
                    {"epochs", result.history.size()},
                    {"best_epoch", result.best_epoch},
                    {"best_composite", result.best_score},
                    {"path", ckpt_path}});
  return 0;
}

int cmd_cv(const RunConfig& cfg) {
  const auto tax = Taxonomy::load(cfg.taxonomy_path);
  const auto corpus = read_corpus_jsonl(cfg.corpus_path, tax);
  const auto ctx = make_score_context(cfg);
  const auto folds = kfold_split(int64_t(corpus.size()), cfg.train.n_folds, cfg.seed);

  nlohmann::json fold_reports = nlohmann::json::array();
  std::vector<double> scores;
  for (size_t f = 0; f < folds.size(); ++f) {
    const uint64_t fold_seed = Rng::derive(cfg.seed, uint64_t(f) + 1);
    std::vector<PairedSample> train_set, val_set;
    for (int64_t i : folds[f].first) train_set.push_back(corpus[size_t(i)]);
    for (int64_t i : folds[f].second) val_set.push_back(corpus[size_t(i)]);

    std::vector<std::string> texts;
    for (const auto& s : train_set) texts.push_back(s.report_text);
    Vocab vocab = build_corpus_vocab(corpus, cfg.model.prompt_text);
    ModelConfig mcfg = configure_model(cfg, corpus, tax, vocab);
    const auto initial =
        init_backbone_pretrain(texts, vocab, mcfg, cfg.pretrain_steps, fold_seed);

    TrainConfig tcfg = cfg.train;
    tcfg.seed = fold_seed;
    const auto result = train_fold(train_set, val_set, initial, mcfg, tcfg, ctx, vocab);
    const auto ckpt_path = out_path(cfg, "fold" + std::to_string(f) + ".ckpt");
    save_checkpoint(ckpt_path, result.best_state, mcfg, vocab);
    write_history(out_path(cfg, "history_fold" + std::to_string(f) + ".jsonl"),
                  result.history);

    nlohmann::json fr;
    fr["fold"] = f;
    fr["best_epoch"] = result.best_epoch;
    fr["best_composite"] = result.best_score;
    fr["epochs_run"] = result.history.size();
    fold_reports.push_back(fr);
    scores.push_back(result.best_score);
    log_line("info", {{"event", "cv-fold"}, {"fold", f}, {"best", result.best_score}});
  }

  double mean = 0;
  for (double s : scores) mean += s;
  mean /= double(scores.size());
  double var = 0;
  for (double s : scores) var += (s - mean) * (s - mean);
  const double sd = scores.size() > 1 ? std::sqrt(var / double(scores.size() - 1)) : 0.0;

  nlohmann::json report;
  report["folds"] = fold_reports;
  report["mean_composite"] = mean;
  report["sd_composite"] = sd;
  report["n_folds"] = folds.size();
  report["seed"] = cfg.seed;
  const auto path = out_path(cfg, "cv_report.json");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << report.dump(2) << "\n";
  log_line("info", {{"event", "cv"}, {"mean", mean}, {"sd", sd}, {"path", path}});
  return 0;
}

int cmd_generate(const RunConfig& cfg) {
  auto ckpt = load_checkpoint(cfg.checkpoint_path);
  const auto tax = Taxonomy::load(cfg.taxonomy_path);
  const auto corpus = read_corpus_jsonl(cfg.corpus_path, tax);

  GenerateOptions opts;
  opts.prompt_text = cfg.model.prompt_text;
  opts.max_len = ckpt.config.max_len;
  opts.zero_prefix = cfg.zero_prefix;
  opts.beam_width = cfg.beam;

  const auto path = out_path(cfg, "generated.jsonl");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("generate: cannot write " + path);
  for (const auto& s : corpus) {
    const auto text = generate(s.features, ckpt.state, ckpt.config, ckpt.vocab, opts);
    nlohmann::json j;
    j["id"] = s.id;
    j["generated"] = text;
    j["reference"] = s.report_text;
    f << j.dump() << "\n";
  }
  log_line("info", {{"event", "generate"}, {"n", corpus.size()}, {"path", path}});
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  std::vector<PairRecord> pairs;
  if (!cfg.pairs_path.empty()) {
    pairs = read_pairs_jsonl(cfg.pairs_path);
  } else if (!cfg.generated_path.empty() && !cfg.corpus_path.empty()) {
    const auto tax = Taxonomy::load(cfg.taxonomy_path);
    const auto corpus = read_corpus_jsonl(cfg.corpus_path, tax);
    std::map<std::string, std::string> refs;
    for (const auto& s : corpus) refs[s.id] = s.report_text;
    for (const auto& g : read_pairs_jsonl(cfg.generated_path)) {
      auto it = refs.find(g.id);
      if (it == refs.end()) {
        throw std::runtime_error("evaluate: id '" + g.id + "' not present in corpus");
      }
      pairs.push_back({g.id, g.generated, it->second});
    }
  } else {
    throw std::invalid_argument("evaluate: need --pairs or --generated with --corpus");
  }

  const auto ctx = make_score_context(cfg);
  const auto score = score_corpus(pairs, ctx);

  nlohmann::json out;
  out["mean"] = breakdown_json(score.mean);
  nlohmann::json per = nlohmann::json::array();
  for (const auto& [id, s] : score.pairs) {
    auto j = breakdown_json(s);
    j["id"] = id;
    per.push_back(j);
  }
  out["pairs"] = per;
  out["backend"] = {{"emb", cfg.emb_backend}, {"lexicon", ctx.lexicon.sha256}};
  const auto path = out_path(cfg, "metrics.json");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << out.dump(2) << "\n";
  log_line("info",
           {{"event", "evaluate"}, {"n", pairs.size()}, {"mean", score.mean.composite}});
  return 0;
}

int cmd_score(const RunConfig& cfg, const std::string& generated, const std::string& reference) {
  const auto ctx = make_score_context(cfg);
  const auto s = score_pair(generated, reference, ctx);
  std::cout << breakdown_json(s).dump() << "\n";
  return 0;
}

std::string find_config_arg(const std::vector<std::string>& args) {
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

}  // namespace

int run(const std::vector<std::string>& args) {
  RunConfig cfg;
  try {
    const auto config_path = find_config_arg(args);
    if (!config_path.empty()) apply_config_file(cfg, config_path);

    CLI::App app{"visual-prefix pathology report generation"};
    app.require_subcommand(1);
    app.fallthrough(true);  // global flags may follow the subcommand
    std::string config_dummy;
    app.add_option("--config", config_dummy, "JSON config with flat dotted keys");
    app.add_option("--seed", cfg.seed, "master seed");
    app.add_option("--out-dir", cfg.out_dir, "output directory");
    app.add_option("--lexicon", cfg.lexicon_path, "keyword lexicon file");
    app.add_option("--taxonomy", cfg.taxonomy_path, "organ taxonomy file");
    app.add_option("--emb-backend", cfg.emb_backend, "emb backend: trigram|model");
    app.add_option("--emb-checkpoint", cfg.emb_checkpoint, "checkpoint for emb model backend");

    auto* gen_data = app.add_subcommand("gen-data", "synthesize a paired corpus");
    gen_data->add_option("--n", cfg.n_samples, "number of samples");
    gen_data->add_option("--dv", cfg.d_v, "feature dimension");
    gen_data->add_option("--noise-sigma", cfg.noise_sigma, "feature noise sigma");

    auto* pretrain = app.add_subcommand("pretrain", "pretrain and freeze the backbone");
    pretrain->add_option("--corpus", cfg.corpus_path, "corpus JSONL")->required();
    pretrain->add_option("--steps", cfg.pretrain_steps, "optimizer steps");
    pretrain->add_option("--prompt-dropout", cfg.model.prompt_dropout, "prompt dropout");
    pretrain->add_option("--prefix-len", cfg.model.L_p, "prefix length L_p");
    pretrain->add_option("--max-len", cfg.model.max_len, "max sequence length");

    auto* train = app.add_subcommand("train", "train the prompt encoder and aux heads");
    train->add_option("--corpus", cfg.corpus_path, "corpus JSONL")->required();
    train->add_option("--init", cfg.init_path, "pretrained backbone checkpoint");
    train->add_option("--epochs", cfg.train.max_epochs, "max epochs");
    train->add_option("--batch-size", cfg.train.batch_size, "batch size");
    train->add_option("--lr", cfg.train.lr, "learning rate");
    train->add_option("--patience", cfg.train.patience, "early stopping patience");
    train->add_option("--warmup", cfg.train.warmup_steps, "warmup steps");
    train->add_option("--prompt-dropout", cfg.model.prompt_dropout, "prompt dropout");
    train->add_option("--prefix-len", cfg.model.L_p, "prefix length L_p");
    train->add_option("--val-frac", cfg.val_frac, "validation fraction");
    train->add_option("--pretrain-steps", cfg.pretrain_steps,
                      "pretrain steps when --init is absent");

    auto* cv = app.add_subcommand("cv", "cross-validated training");
    cv->add_option("--corpus", cfg.corpus_path, "corpus JSONL")->required();
    cv->add_option("--folds", cfg.train.n_folds, "number of folds");
    cv->add_option("--epochs", cfg.train.max_epochs, "max epochs");
    cv->add_option("--batch-size", cfg.train.batch_size, "batch size");
    cv->add_option("--lr", cfg.train.lr, "learning rate");
    cv->add_option("--patience", cfg.train.patience, "early stopping patience");
    cv->add_option("--prompt-dropout", cfg.model.prompt_dropout, "prompt dropout");
    cv->add_option("--prefix-len", cfg.model.L_p, "prefix length L_p");
    cv->add_option("--pretrain-steps", cfg.pretrain_steps, "pretrain steps per fold");

    auto* generate_cmd = app.add_subcommand("generate", "generate reports from features");
    generate_cmd->add_option("--checkpoint", cfg.checkpoint_path, "trained checkpoint")
        ->required();
    generate_cmd->add_option("--corpus", cfg.corpus_path, "corpus JSONL with features")
        ->required();
    generate_cmd->add_option("--prompt", cfg.model.prompt_text, "inference prompt");
    generate_cmd->add_option("--beam", cfg.beam, "beam width (1 = greedy)");
    generate_cmd->add_flag("--zero-prefix", cfg.zero_prefix, "ablate the visual prefix");

    auto* evaluate = app.add_subcommand("evaluate", "score generated vs reference reports");
    evaluate->add_option("--pairs", cfg.pairs_path, "JSONL with id/generated/reference");
    evaluate->add_option("--generated", cfg.generated_path, "generated JSONL");
    evaluate->add_option("--corpus", cfg.corpus_path, "reference corpus JSONL");

    auto* score = app.add_subcommand("score", "score one candidate/reference pair");
    std::string score_generated, score_reference;
    score->add_option("--generated", score_generated, "candidate text")->required();
    score->add_option("--reference", score_reference, "reference text")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) {  // --help
        return app.exit(e);
      }
      std::cerr << e.what() << "\n";
      return 1;
    }

    if (gen_data->parsed()) return cmd_gen_data(cfg);
    if (pretrain->parsed()) return cmd_pretrain(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (cv->parsed()) return cmd_cv(cfg);
    if (generate_cmd->parsed()) return cmd_generate(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (score->parsed()) return cmd_score(cfg, score_generated, score_reference);
    std::cerr << "no subcommand given\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    log_line("error", {{"msg", e.what()}});
    return 1;
  } catch (const std::exception& e) {
    log_line("error", {{"msg", e.what()}});
    return 2;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace mpath::cli
