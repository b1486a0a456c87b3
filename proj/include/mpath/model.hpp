#pragma once

#include <map>
#include <optional>
#include <type_traits>
#include <span>
#include <string>
#include <vector>

#include "mpath/autograd.hpp"
#include "mpath/reports.hpp"
#include "mpath/rng.hpp"
#include "mpath/tensor.hpp"
#include "mpath/tokenizer.hpp"

namespace mpath {

struct ModelConfig {
  int64_t d_v = 768;        // visual feature dimension
  int64_t h = 512;          // prompt-encoder hidden width
  int64_t L_p = 8;          // prefix length in pseudo-tokens
  int64_t d = 64;           // backbone embedding size
  int64_t n_enc_layers = 2;
  int64_t n_dec_layers = 2;
  int64_t n_heads = 4;
  int64_t ffn_dim = 128;
  int64_t vocab_size = 0;
  int64_t max_len = 96;
  std::string prompt_text = "Pathology report:";
  double prompt_dropout = 0.2;
  bool prefix_decoder_side = false;  // prefix goes to the encoder by default
  double lambda_organ = 0.1;
  double lambda_sample = 0.1;
  double lambda_finding = 0.1;
  int64_t n_organs = 7;
  int64_t n_sample_types = 0;
  int64_t n_findings = 0;

  void validate() const;
};

template <typename T>
struct Param {
  Tensor<T> value;
  bool frozen = false;
};

// Named parameter set partitioned into a frozen backbone and the trainable
// prompt encoder + auxiliary heads. Map order (lexicographic) is the
// canonical order for hashing and serialization.
template <typename T>
struct ModelState {
  std::map<std::string, Param<T>> params;

  Tensor<T>& at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw std::out_of_range("model: no parameter '" + name + "'");
    return it->second.value;
  }
  const Tensor<T>& at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::out_of_range("model: no parameter '" + name + "'");
    return it->second.value;
  }
  bool frozen(const std::string& name) const { return params.at(name).frozen; }

  void add(const std::string& name, Tensor<T> value, bool frozen) {
    value.set_requires_grad(!frozen);
    params.emplace(name, Param<T>{std::move(value), frozen});
  }
  void set_frozen(const std::string& name, bool frozen) {
    auto& p = params.at(name);
    p.frozen = frozen;
    p.value.set_requires_grad(!frozen);
  }
  void zero_grads() {
    for (auto& [name, p] : params) p.value.drop_grad();
  }

  // allocates zero grads for trainable parameters the last backward pass did
  // not reach, satisfying the optimizer precondition
  void ensure_trainable_grads() {
    for (auto& [name, p] : params) {
      if (!p.frozen) p.value.ensure_grad();
    }
  }

  ModelState clone() const {
    ModelState out;
    for (const auto& [name, p] : params) out.add(name, p.value.clone(), p.frozen);
    return out;
  }
};

using ModelStateF = ModelState<float>;

bool is_backbone_param(const std::string& name);

// Fresh parameter set; every backbone tensor starts trainable (the pretrain
// step freezes them afterwards), prompt encoder and aux heads stay trainable.
ModelStateF init_model_state(const ModelConfig& cfg, uint64_t seed);

template <typename T>
ModelState<T> cast_state(const ModelStateF& src) {
  ModelState<T> out;
  for (const auto& [name, p] : src.params) {
    std::vector<T> data(p.value.data().begin(), p.value.data().end());
    out.add(name, Tensor<T>::from_vector(p.value.shape(), std::move(data)), p.frozen);
  }
  return out;
}

// SHA-256 over the little-endian float payload of frozen parameters, in
// canonical name order.
std::string frozen_params_sha256(const ModelStateF& state);

// sinusoidal table over positions [0, len)
template <typename T>
Tensor<T> sinusoidal_positions(int64_t len, int64_t dim);

template <typename T>
Tensor<T> causal_mask_tensor(int64_t len);

template <typename T>
struct PrefixOut {
  Tensor<T> p_v;    // (L_p, d)
  Tensor<T> h_vec;  // (1, h)
};

template <typename T>
PrefixOut<T> encode_visual_prefix(Graph<T>& g, std::span<const float> f_wsi,
                                  const ModelState<T>& state, const ModelConfig& cfg);

template <typename T>
struct EncoderInput {
  Tensor<T> seq;            // (L_p + |prompt|, d)
  std::vector<float> mask;  // all ones; zeros would mark padding
};

template <typename T>
EncoderInput<T> build_encoder_input(Graph<T>& g, Tensor<T> p_v,
                                    const std::vector<int32_t>& prompt_ids,
                                    const ModelState<T>& state, const ModelConfig& cfg);

// full encoder stack over an already-embedded sequence (positions added here)
template <typename T>
Tensor<T> encoder_forward(Graph<T>& g, Tensor<T> seq, const ModelState<T>& state,
                          const ModelConfig& cfg);

// teacher-forcing decoder: returns (|dec_ids|, V) logits
template <typename T>
Tensor<T> decoder_forward(Graph<T>& g, const std::vector<int32_t>& dec_ids, Tensor<T> enc_out,
                          const ModelState<T>& state, const ModelConfig& cfg,
                          std::optional<std::type_identity_t<Tensor<T>>> prefix = std::nullopt);

struct LossParts {
  double gen = 0.0;
  double organ = 0.0;
  double sample = 0.0;
  double finding = 0.0;
  double total = 0.0;
  int64_t truncated = 0;  // targets clipped to max_len
};

template <typename T>
Tensor<T> forward_loss(Graph<T>& g, std::span<const PairedSample> batch,
                       const ModelState<T>& state, const ModelConfig& cfg, const Vocab& vocab,
                       Rng& rng, LossParts* parts = nullptr);

struct GenerateOptions {
  std::string prompt_text;  // empty string = empty prompt
  int64_t max_len = 96;
  bool zero_prefix = false;  // ablation: replace p_v by zeros at inference
  int beam_width = 1;        // 1 = greedy
};

std::string generate(std::span<const float> f_wsi, const ModelStateF& state,
                     const ModelConfig& cfg, const Vocab& vocab, const GenerateOptions& opts);

struct PretrainStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int64_t steps = 0;
};

// Denoising text autoencoder over report texts alone: the encoder sees a
// zeroed prefix plus a token-dropped report, the decoder reconstructs the
// full report. All parameters train; the backbone is frozen on return.
ModelStateF init_backbone_pretrain(std::span<const std::string> texts, const Vocab& vocab,
                                   const ModelConfig& cfg, int64_t steps, uint64_t seed,
                                   PretrainStats* stats = nullptr);

std::string sample_prompt(Rng& rng, const ModelConfig& cfg);

}  // namespace mpath

#include "mpath/model_forward.hpp"
