#pragma once

// Template bodies for the model forward pass. Everything here runs in both
// float (training/inference) and double (gradient-check mode).

#include <cmath>

#include "mpath/model.hpp"

namespace mpath {

template <typename T>
Tensor<T> sinusoidal_positions(int64_t len, int64_t dim) {
  std::vector<T> data(static_cast<size_t>(len * dim));
  for (int64_t p = 0; p < len; ++p) {
    for (int64_t i = 0; i < dim; i += 2) {
      const double angle =
          double(p) / std::pow(10000.0, double(i) / double(dim));
      data[static_cast<size_t>(p * dim + i)] = static_cast<T>(std::sin(angle));
      if (i + 1 < dim) {
        data[static_cast<size_t>(p * dim + i + 1)] = static_cast<T>(std::cos(angle));
      }
    }
  }
  return Tensor<T>::from_vector({len, dim}, std::move(data));
}

template <typename T>
Tensor<T> causal_mask_tensor(int64_t len) {
  std::vector<T> data(static_cast<size_t>(len * len), T(0));
  for (int64_t i = 0; i < len; ++i) {
    for (int64_t j = i + 1; j < len; ++j) {
      data[static_cast<size_t>(i * len + j)] = static_cast<T>(-1e9);
    }
  }
  return Tensor<T>::from_vector({len, len}, std::move(data));
}

namespace detail {

template <typename T>
Tensor<T> attention_block(Graph<T>& g, Tensor<T> q_src, Tensor<T> kv_src,
                          const ModelState<T>& st, const std::string& pfx, int64_t n_heads,
                          const std::type_identity_t<Tensor<T>>* mask) {
  auto q = g.add_row(g.matmul(q_src, st.at(pfx + ".wq")), st.at(pfx + ".bq"));
  auto k = g.matmul(kv_src, st.at(pfx + ".wk"));
  auto v = g.add_row(g.matmul(kv_src, st.at(pfx + ".wv")), st.at(pfx + ".bv"));
  const int64_t dm = q.shape()[1];
  const int64_t dh = dm / n_heads;
  Tensor<T> heads;
  for (int64_t hh = 0; hh < n_heads; ++hh) {
    auto qh = g.slice_cols(q, hh * dh, (hh + 1) * dh);
    auto kh = g.slice_cols(k, hh * dh, (hh + 1) * dh);
    auto vh = g.slice_cols(v, hh * dh, (hh + 1) * dh);
    auto scores = g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(double(dh)));
    if (mask) scores = g.add(scores, *mask);
    auto oh = g.matmul(g.softmax_rows(scores), vh);
    heads = (hh == 0) ? oh : g.concat_cols(heads, oh);
  }
  return g.add_row(g.matmul(heads, st.at(pfx + ".wo")), st.at(pfx + ".bo"));
}

template <typename T>
Tensor<T> ffn_block(Graph<T>& g, Tensor<T> x, const ModelState<T>& st, const std::string& pfx) {
  auto h1 = g.relu(g.add_row(g.matmul(x, st.at(pfx + ".w1")), st.at(pfx + ".b1")));
  return g.add_row(g.matmul(h1, st.at(pfx + ".w2")), st.at(pfx + ".b2"));
}

template <typename T>
Tensor<T> layer_norm_named(Graph<T>& g, Tensor<T> x, const ModelState<T>& st,
                           const std::string& pfx) {
  return g.layer_norm(x, st.at(pfx + ".g"), st.at(pfx + ".b"));
}

}  // namespace detail

template <typename T>
PrefixOut<T> encode_visual_prefix(Graph<T>& g, std::span<const float> f_wsi,
                                  const ModelState<T>& state, const ModelConfig& cfg) {
  if (static_cast<int64_t>(f_wsi.size()) != cfg.d_v) {
    throw std::invalid_argument("encode_visual_prefix: feature length " +
                                std::to_string(f_wsi.size()) + " does not match d_v=" +
                                std::to_string(cfg.d_v));
  }
  std::vector<T> f(f_wsi.begin(), f_wsi.end());
  auto f_row = Tensor<T>::from_vector({1, cfg.d_v}, std::move(f));
  // h = relu(W1 f + b1) with W1 stored (h, d_v)
  auto h_vec = g.relu(
      g.add_row(g.matmul(f_row, g.transpose(state.at("prompt.w1"))), state.at("prompt.b1")));
  // p_v = reshape(W2 h + b2, L_p x d) with W2 stored (L_p*d, h)
  auto p_flat =
      g.add_row(g.matmul(h_vec, g.transpose(state.at("prompt.w2"))), state.at("prompt.b2"));
  auto p_v = g.reshape(p_flat, {cfg.L_p, cfg.d});
  return {p_v, h_vec};
}

template <typename T>
EncoderInput<T> build_encoder_input(Graph<T>& g, Tensor<T> p_v,
                                    const std::vector<int32_t>& prompt_ids,
                                    const ModelState<T>& state, const ModelConfig& cfg) {
  (void)cfg;
  auto tok = g.embedding(state.at("emb.tok"), prompt_ids);
  auto seq = prompt_ids.empty() ? p_v : g.concat_rows(p_v, tok);
  EncoderInput<T> out;
  out.seq = seq;
  out.mask.assign(static_cast<size_t>(seq.shape()[0]), 1.0f);
  return out;
}

template <typename T>
Tensor<T> encoder_forward(Graph<T>& g, Tensor<T> seq, const ModelState<T>& state,
                          const ModelConfig& cfg) {
  const int64_t s = seq.shape()[0];
  auto x = g.add(seq, sinusoidal_positions<T>(s, cfg.d));
  for (int64_t i = 0; i < cfg.n_enc_layers; ++i) {
    const std::string pfx = "enc." + std::to_string(i);
    auto ln1 = detail::layer_norm_named(g, x, state, pfx + ".ln1");
    x = g.add(x, detail::attention_block(g, ln1, ln1, state, pfx + ".attn", cfg.n_heads,
                                         nullptr));
    auto ln2 = detail::layer_norm_named(g, x, state, pfx + ".ln2");
    x = g.add(x, detail::ffn_block(g, ln2, state, pfx + ".ffn"));
  }
  return detail::layer_norm_named(g, x, state, "enc.final_ln");
}

template <typename T>
Tensor<T> decoder_forward(Graph<T>& g, const std::vector<int32_t>& dec_ids, Tensor<T> enc_out,
                          const ModelState<T>& state, const ModelConfig& cfg,
                          std::optional<std::type_identity_t<Tensor<T>>> prefix) {
  auto emb = g.embedding(state.at("emb.tok"), dec_ids);
  Tensor<T> x = prefix ? g.concat_rows(*prefix, emb) : emb;
  const int64_t s = x.shape()[0];
  x = g.add(x, sinusoidal_positions<T>(s, cfg.d));
  const auto mask = causal_mask_tensor<T>(s);
  for (int64_t i = 0; i < cfg.n_dec_layers; ++i) {
    const std::string pfx = "dec." + std::to_string(i);
    auto ln1 = detail::layer_norm_named(g, x, state, pfx + ".ln1");
    x = g.add(x, detail::attention_block(g, ln1, ln1, state, pfx + ".attn", cfg.n_heads,
                                         &mask));
    auto ln2 = detail::layer_norm_named(g, x, state, pfx + ".ln2");
    x = g.add(x,
              detail::attention_block(g, ln2, enc_out, state, pfx + ".cross", cfg.n_heads,
                                      nullptr));
    auto ln3 = detail::layer_norm_named(g, x, state, pfx + ".ln3");
    x = g.add(x, detail::ffn_block(g, ln3, state, pfx + ".ffn"));
  }
  x = detail::layer_norm_named(g, x, state, "dec.final_ln");
  return g.add_row(g.matmul(x, state.at("lm_head.w")), state.at("lm_head.b"));
}

inline std::string sample_prompt(Rng& rng, const ModelConfig& cfg) {
  return rng.uniform() < cfg.prompt_dropout ? std::string() : cfg.prompt_text;
}

template <typename T>
Tensor<T> forward_loss(Graph<T>& g, std::span<const PairedSample> batch,
                       const ModelState<T>& state, const ModelConfig& cfg, const Vocab& vocab,
                       Rng& rng, LossParts* parts) {
  if (batch.empty()) throw std::invalid_argument("forward_loss: empty batch");

  Tensor<T> gen_sum, organ_sum, sample_sum, finding_sum;
  int64_t truncated = 0;
  for (size_t b = 0; b < batch.size(); ++b) {
    const auto& sample = batch[b];
    const std::string prompt = sample_prompt(rng, cfg);
    auto prefix = encode_visual_prefix(g, sample.features, state, cfg);

    auto ids = encode(sample.report_text, vocab, true);
    if (static_cast<int64_t>(ids.size()) > cfg.max_len + 1) {
      ids.resize(static_cast<size_t>(cfg.max_len + 1));
      ++truncated;
    }
    std::vector<int32_t> dec_in(ids.begin(), ids.end() - 1);
    std::vector<int32_t> targets(ids.begin() + 1, ids.end());
    for (auto& t : targets) {
      if (t == Vocab::kPad) t = -1;
    }

    const auto prompt_ids = encode(prompt, vocab, false);
    Tensor<T> logits;
    if (cfg.prefix_decoder_side) {
      // prefix rows are prepended on the decoder; the encoder sees only the
      // textual prompt (an all-zero row if the prompt is empty)
      Tensor<T> enc_seq;
      if (prompt_ids.empty()) {
        enc_seq = Tensor<T>::zeros({1, cfg.d});
      } else {
        enc_seq = g.embedding(state.at("emb.tok"), prompt_ids);
      }
      auto enc_out = encoder_forward(g, enc_seq, state, cfg);
      logits = decoder_forward(g, dec_in, enc_out, state, cfg, prefix.p_v);
      std::vector<int32_t> padded(static_cast<size_t>(cfg.L_p), -1);
      padded.insert(padded.end(), targets.begin(), targets.end());
      targets = std::move(padded);
    } else {
      auto enc_in = build_encoder_input(g, prefix.p_v, prompt_ids, state, cfg);
      auto enc_out = encoder_forward(g, enc_in.seq, state, cfg);
      logits = decoder_forward(g, dec_in, enc_out, state, cfg);
    }
    auto gen = g.cross_entropy(logits, targets, -1);

    auto organ_logits = g.add_row(
        g.matmul(prefix.h_vec, g.transpose(state.at("aux.organ.w"))), state.at("aux.organ.b"));
    auto organ = g.cross_entropy(organ_logits, {sample.labels.organ_id});
    auto sample_logits =
        g.add_row(g.matmul(prefix.h_vec, g.transpose(state.at("aux.sample.w"))),
                  state.at("aux.sample.b"));
    auto sample_loss = g.cross_entropy(sample_logits, {sample.labels.sample_type_id});
    auto finding_logits =
        g.add_row(g.matmul(prefix.h_vec, g.transpose(state.at("aux.finding.w"))),
                  state.at("aux.finding.b"));
    std::vector<float> multi_hot(static_cast<size_t>(cfg.n_findings), 0.0f);
    for (int32_t f : sample.labels.finding_ids) multi_hot[static_cast<size_t>(f)] = 1.0f;
    auto finding = g.bce_logits(finding_logits, multi_hot);

    gen_sum = (b == 0) ? gen : g.add(gen_sum, gen);
    organ_sum = (b == 0) ? organ : g.add(organ_sum, organ);
    sample_sum = (b == 0) ? sample_loss : g.add(sample_sum, sample_loss);
    finding_sum = (b == 0) ? finding : g.add(finding_sum, finding);
  }

  const double inv = 1.0 / double(batch.size());
  auto gen_mean = g.scale(gen_sum, inv);
  auto organ_mean = g.scale(organ_sum, inv);
  auto sample_mean = g.scale(sample_sum, inv);
  auto finding_mean = g.scale(finding_sum, inv);

  auto total = gen_mean;
  if (cfg.lambda_organ != 0.0) total = g.add(total, g.scale(organ_mean, cfg.lambda_organ));
  if (cfg.lambda_sample != 0.0) total = g.add(total, g.scale(sample_mean, cfg.lambda_sample));
  if (cfg.lambda_finding != 0.0) {
    total = g.add(total, g.scale(finding_mean, cfg.lambda_finding));
  }

  if (parts) {
    parts->gen = double(gen_mean.item());
    parts->organ = double(organ_mean.item());
    parts->sample = double(sample_mean.item());
    parts->finding = double(finding_mean.item());
    parts->total = double(total.item());
    parts->truncated = truncated;
  }
  return total;
}

}  // namespace mpath
