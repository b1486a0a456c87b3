#include "mpath/model.hpp"

#include <algorithm>
#include <cmath>

#include "mpath/sha256.hpp"
#include "mpath/training.hpp"

namespace mpath {

namespace {
constexpr uint64_t kInitStream = 0x1717c0ffee000001ULL;
constexpr uint64_t kPretrainStream = 0x1717c0ffee000002ULL;
}  // namespace

void ModelConfig::validate() const {
  if (d_v < 1 || h < 1 || d < 1 || ffn_dim < 1) {
    throw std::invalid_argument("model config: dimensions must be positive");
  }
  if (L_p < 1) throw std::invalid_argument("model config: L_p must be >= 1");
  if (n_heads < 1 || d % n_heads != 0) {
    throw std::invalid_argument("model config: d must be divisible by n_heads");
  }
  if (vocab_size < 5) {
    throw std::invalid_argument("model config: vocab_size must cover the specials");
  }
  if (prompt_dropout < 0.0 || prompt_dropout > 1.0) {
    throw std::invalid_argument("model config: prompt_dropout must lie in [0,1]");
  }
  if (max_len < 2) throw std::invalid_argument("model config: max_len too small");
  if (n_organs < 2 || n_sample_types < 1 || n_findings < 1) {
    throw std::invalid_argument("model config: label spaces not configured");
  }
}

bool is_backbone_param(const std::string& name) {
  return name.rfind("emb.", 0) == 0 || name.rfind("enc.", 0) == 0 ||
         name.rfind("dec.", 0) == 0 || name.rfind("lm_head.", 0) == 0;
}

namespace {

TensorF xavier(Rng& rng, int64_t rows, int64_t cols) {
  const double limit = std::sqrt(6.0 / double(rows + cols));
  std::vector<float> data(static_cast<size_t>(rows * cols));
  for (auto& v : data) v = static_cast<float>(rng.uniform(-limit, limit));
  return TensorF::from_vector({rows, cols}, std::move(data));
}

TensorF vector_zeros(int64_t n) { return TensorF::zeros({n}); }

TensorF vector_ones(int64_t n) { return TensorF::full({n}, 1.0f); }

// no key bias: softmax shift invariance makes it a dead parameter
void add_attention(ModelStateF& st, Rng& rng, const std::string& pfx, int64_t d) {
  for (const char* w : {".wq", ".wk", ".wv", ".wo"}) st.add(pfx + w, xavier(rng, d, d), false);
  for (const char* b : {".bq", ".bv", ".bo"}) st.add(pfx + b, vector_zeros(d), false);
}

void add_layer_norm(ModelStateF& st, const std::string& pfx, int64_t d) {
  st.add(pfx + ".g", vector_ones(d), false);
  st.add(pfx + ".b", vector_zeros(d), false);
}

void add_ffn(ModelStateF& st, Rng& rng, const std::string& pfx, int64_t d, int64_t ffn) {
  st.add(pfx + ".w1", xavier(rng, d, ffn), false);
  st.add(pfx + ".b1", vector_zeros(ffn), false);
  st.add(pfx + ".w2", xavier(rng, ffn, d), false);
  st.add(pfx + ".b2", vector_zeros(d), false);
}

}  // namespace

ModelStateF init_model_state(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(Rng::derive(seed, kInitStream));
  ModelStateF st;

  {
    std::vector<float> emb(static_cast<size_t>(cfg.vocab_size * cfg.d));
    for (auto& v : emb) v = static_cast<float>(rng.normal() * 0.05);
    st.add("emb.tok", TensorF::from_vector({cfg.vocab_size, cfg.d}, std::move(emb)), false);
  }
  for (int64_t i = 0; i < cfg.n_enc_layers; ++i) {
    const std::string pfx = "enc." + std::to_string(i);
    add_layer_norm(st, pfx + ".ln1", cfg.d);
    add_attention(st, rng, pfx + ".attn", cfg.d);
    add_layer_norm(st, pfx + ".ln2", cfg.d);
    add_ffn(st, rng, pfx + ".ffn", cfg.d, cfg.ffn_dim);
  }
  add_layer_norm(st, "enc.final_ln", cfg.d);
  for (int64_t i = 0; i < cfg.n_dec_layers; ++i) {
    const std::string pfx = "dec." + std::to_string(i);
    add_layer_norm(st, pfx + ".ln1", cfg.d);
    add_attention(st, rng, pfx + ".attn", cfg.d);
    add_layer_norm(st, pfx + ".ln2", cfg.d);
    add_attention(st, rng, pfx + ".cross", cfg.d);
    add_layer_norm(st, pfx + ".ln3", cfg.d);
    add_ffn(st, rng, pfx + ".ffn", cfg.d, cfg.ffn_dim);
  }
  add_layer_norm(st, "dec.final_ln", cfg.d);
  st.add("lm_head.w", xavier(rng, cfg.d, cfg.vocab_size), false);
  st.add("lm_head.b", vector_zeros(cfg.vocab_size), false);

  // prompt encoder, stored in the (out, in) layout
  st.add("prompt.w1", xavier(rng, cfg.h, cfg.d_v), false);
  st.add("prompt.b1", vector_zeros(cfg.h), false);
  st.add("prompt.w2", xavier(rng, cfg.L_p * cfg.d, cfg.h), false);
  st.add("prompt.b2", vector_zeros(cfg.L_p * cfg.d), false);

  st.add("aux.organ.w", xavier(rng, cfg.n_organs, cfg.h), false);
  st.add("aux.organ.b", vector_zeros(cfg.n_organs), false);
  st.add("aux.sample.w", xavier(rng, cfg.n_sample_types, cfg.h), false);
  st.add("aux.sample.b", vector_zeros(cfg.n_sample_types), false);
  st.add("aux.finding.w", xavier(rng, cfg.n_findings, cfg.h), false);
  st.add("aux.finding.b", vector_zeros(cfg.n_findings), false);
  return st;
}

std::string frozen_params_sha256(const ModelStateF& state) {
  Sha256 h;
  for (const auto& [name, p] : state.params) {
    if (!p.frozen) continue;
    const auto data = p.value.data();
    h.update(data.data(), data.size() * sizeof(float));
  }
  return h.hex_digest();
}

namespace {

struct Beam {
  std::vector<int32_t> ids;
  double logp = 0.0;
  bool done = false;
};

std::vector<std::pair<int32_t, double>> top_tokens(const TensorF& logits, int64_t row,
                                                   int width) {
  const int64_t v = logits.shape()[1];
  const float* p = logits.data().data() + row * v;
  // log-softmax of the row
  float mx = p[0];
  for (int64_t j = 1; j < v; ++j) mx = std::max(mx, p[j]);
  double lse = 0.0;
  for (int64_t j = 0; j < v; ++j) lse += std::exp(double(p[j]) - mx);
  lse = std::log(lse) + mx;

  std::vector<std::pair<int32_t, double>> scored(static_cast<size_t>(v));
  for (int64_t j = 0; j < v; ++j) scored[j] = {int32_t(j), double(p[j]) - lse};
  const int take = std::min<int>(width, int(v));
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.second != b.second) return a.second > b.second;
                      return a.first < b.first;
                    });
  scored.resize(static_cast<size_t>(take));
  return scored;
}

}  // namespace

std::string generate(std::span<const float> f_wsi, const ModelStateF& state,
                     const ModelConfig& cfg, const Vocab& vocab, const GenerateOptions& opts) {
  GraphF g(GradMode::kNoGrad);
  TensorF p_v;
  if (opts.zero_prefix) {
    p_v = TensorF::zeros({cfg.L_p, cfg.d});
  } else {
    p_v = encode_visual_prefix(g, f_wsi, state, cfg).p_v;
  }
  const auto prompt_ids = encode(opts.prompt_text, vocab, false);

  TensorF enc_out;
  std::optional<TensorF> dec_prefix;
  if (cfg.prefix_decoder_side) {
    TensorF enc_seq = prompt_ids.empty() ? TensorF::zeros({1, cfg.d})
                                         : g.embedding(state.at("emb.tok"), prompt_ids);
    enc_out = encoder_forward(g, enc_seq, state, cfg);
    dec_prefix = p_v;
  } else {
    auto enc_in = build_encoder_input(g, p_v, prompt_ids, state, cfg);
    enc_out = encoder_forward(g, enc_in.seq, state, cfg);
  }

  const int width = std::max(1, opts.beam_width);
  std::vector<Beam> beams = {Beam{{Vocab::kBos}, 0.0, false}};
  for (int64_t step = 0; step < opts.max_len; ++step) {
    bool all_done = true;
    for (const auto& b : beams) all_done = all_done && b.done;
    if (all_done) break;

    std::vector<Beam> cands;
    for (const auto& b : beams) {
      if (b.done) {
        cands.push_back(b);
        continue;
      }
      GraphF gs(GradMode::kNoGrad);
      const auto logits = decoder_forward(gs, b.ids, enc_out, state, cfg, dec_prefix);
      const auto next = top_tokens(logits, logits.shape()[0] - 1, width);
      for (const auto& [tok, lp] : next) {
        Beam nb = b;
        nb.ids.push_back(tok);
        nb.logp += lp;
        nb.done = tok == Vocab::kEos;
        cands.push_back(std::move(nb));
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Beam& a, const Beam& b) {
      if (a.logp != b.logp) return a.logp > b.logp;
      return a.ids < b.ids;
    });
    if (static_cast<int>(cands.size()) > width) cands.resize(static_cast<size_t>(width));
    beams = std::move(cands);
  }

  const Beam* best = &beams[0];
  for (const auto& b : beams) {
    if (b.logp > best->logp) best = &b;
  }
  return decode(best->ids, vocab);
}

ModelStateF init_backbone_pretrain(std::span<const std::string> texts, const Vocab& vocab,
                                   const ModelConfig& cfg, int64_t steps, uint64_t seed,
                                   PretrainStats* stats) {
  if (texts.empty()) throw std::invalid_argument("pretrain: empty corpus");
  if (steps < 1) throw std::invalid_argument("pretrain: steps must be >= 1");

  ModelStateF state = init_model_state(cfg, seed);
  TrainConfig pcfg;
  pcfg.lr = 1e-3;
  pcfg.warmup_steps = 50;
  pcfg.weight_decay = 0.01;
  OptState opt;
  Rng rng(Rng::derive(seed, kPretrainStream));
  const int64_t batch = 8;

  double init_acc = 0.0, final_acc = 0.0;
  int64_t init_n = 0, final_n = 0;
  for (int64_t step = 1; step <= steps; ++step) {
    GraphF g;
    TensorF loss_sum;
    for (int64_t b = 0; b < batch; ++b) {
      const auto& text = texts[rng.below(texts.size())];
      auto ids = encode(text, vocab, true);
      if (static_cast<int64_t>(ids.size()) > cfg.max_len + 1) {
        ids.resize(static_cast<size_t>(cfg.max_len + 1));
      }
      // denoised encoder copy: drop tokens at a per-sample rate
      std::vector<int32_t> kept;
      const double keep = rng.uniform(0.25, 1.0);
      for (size_t i = 1; i + 1 < ids.size(); ++i) {
        if (rng.uniform() < keep) kept.push_back(ids[i]);
      }
      const std::vector<int32_t> dec_in(ids.begin(), ids.end() - 1);
      const std::vector<int32_t> targets_raw(ids.begin() + 1, ids.end());

      TensorF ce;
      if (cfg.prefix_decoder_side) {
        TensorF enc_seq = kept.empty() ? TensorF::zeros({1, cfg.d})
                                       : g.embedding(state.at("emb.tok"), kept);
        auto enc_out = encoder_forward(g, enc_seq, state, cfg);
        auto logits = decoder_forward(g, dec_in, enc_out, state, cfg,
                                      TensorF::zeros({cfg.L_p, cfg.d}));
        std::vector<int32_t> targets(static_cast<size_t>(cfg.L_p), -1);
        targets.insert(targets.end(), targets_raw.begin(), targets_raw.end());
        ce = g.cross_entropy(logits, targets, -1);
      } else {
        TensorF zeros_prefix = TensorF::zeros({cfg.L_p, cfg.d});
        auto tok = g.embedding(state.at("emb.tok"), kept);
        auto seq = kept.empty() ? zeros_prefix : g.concat_rows(zeros_prefix, tok);
        auto enc_out = encoder_forward(g, seq, state, cfg);
        auto logits = decoder_forward(g, dec_in, enc_out, state, cfg);
        ce = g.cross_entropy(logits, targets_raw, -1);
      }
      loss_sum = (b == 0) ? ce : g.add(loss_sum, ce);
    }
    auto loss = g.scale(loss_sum, 1.0 / double(batch));
    const double lv = double(loss.item());
    state.zero_grads();
    g.backward(loss);
    state.ensure_trainable_grads();
    adamw_step(state, opt, lr_at_step(opt.t + 1, pcfg), pcfg);

    if (step <= 10) {
      init_acc += lv;
      ++init_n;
    }
    if (step > steps - 10) {
      final_acc += lv;
      ++final_n;
    }
  }

  for (auto& [name, p] : state.params) {
    if (is_backbone_param(name)) state.set_frozen(name, true);
  }
  if (stats) {
    stats->initial_loss = init_acc / double(init_n);
    stats->final_loss = final_acc / double(final_n);
    stats->steps = steps;
  }
  return state;
}

}  // namespace mpath
