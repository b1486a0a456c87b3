#include "mpath/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace mpath {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'R', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string& in, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(in[at + i])) << (8 * i);
  return v;
}

uint64_t get_u64(const std::string& in, size_t at) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["d_v"] = cfg.d_v;
  j["h"] = cfg.h;
  j["L_p"] = cfg.L_p;
  j["d"] = cfg.d;
  j["n_enc_layers"] = cfg.n_enc_layers;
  j["n_dec_layers"] = cfg.n_dec_layers;
  j["n_heads"] = cfg.n_heads;
  j["ffn_dim"] = cfg.ffn_dim;
  j["vocab_size"] = cfg.vocab_size;
  j["max_len"] = cfg.max_len;
  j["prompt_text"] = cfg.prompt_text;
  j["prompt_dropout"] = cfg.prompt_dropout;
  j["prefix_decoder_side"] = cfg.prefix_decoder_side;
  j["lambda_organ"] = cfg.lambda_organ;
  j["lambda_sample"] = cfg.lambda_sample;
  j["lambda_finding"] = cfg.lambda_finding;
  j["n_organs"] = cfg.n_organs;
  j["n_sample_types"] = cfg.n_sample_types;
  j["n_findings"] = cfg.n_findings;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.d_v = j.at("d_v").get<int64_t>();
  cfg.h = j.at("h").get<int64_t>();
  cfg.L_p = j.at("L_p").get<int64_t>();
  cfg.d = j.at("d").get<int64_t>();
  cfg.n_enc_layers = j.at("n_enc_layers").get<int64_t>();
  cfg.n_dec_layers = j.at("n_dec_layers").get<int64_t>();
  cfg.n_heads = j.at("n_heads").get<int64_t>();
  cfg.ffn_dim = j.at("ffn_dim").get<int64_t>();
  cfg.vocab_size = j.at("vocab_size").get<int64_t>();
  cfg.max_len = j.at("max_len").get<int64_t>();
  cfg.prompt_text = j.at("prompt_text").get<std::string>();
  cfg.prompt_dropout = j.at("prompt_dropout").get<double>();
  cfg.prefix_decoder_side = j.at("prefix_decoder_side").get<bool>();
  cfg.lambda_organ = j.at("lambda_organ").get<double>();
  cfg.lambda_sample = j.at("lambda_sample").get<double>();
  cfg.lambda_finding = j.at("lambda_finding").get<double>();
  cfg.n_organs = j.at("n_organs").get<int64_t>();
  cfg.n_sample_types = j.at("n_sample_types").get<int64_t>();
  cfg.n_findings = j.at("n_findings").get<int64_t>();
  return cfg;
}

void save_checkpoint(const std::string& path, const ModelStateF& state, const ModelConfig& cfg,
                     const Vocab& vocab) {
  nlohmann::json manifest;
  uint64_t offset = 0;
  for (const auto& [name, p] : state.params) {
    nlohmann::json entry;
    entry["shape"] = p.value.shape();
    entry["dtype"] = "f32";
    entry["offset"] = offset;
    entry["frozen"] = p.frozen;
    manifest[name] = entry;
    offset += uint64_t(p.value.numel()) * sizeof(float);
  }
  nlohmann::json header;
  header["config"] = model_config_to_json(cfg);
  header["vocab"] = nlohmann::json::parse(vocab.to_json());
  header["manifest"] = manifest;
  const std::string header_text = header.dump();

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, header_text.size());
  out += header_text;
  for (const auto& [name, p] : state.params) {
    const auto data = p.value.data();
    const size_t bytes = data.size() * sizeof(float);
    const size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, data.data(), bytes);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("checkpoint: cannot write " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw CheckpointError("checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open " + path);
  std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, 4) != 0) {
    throw CheckpointError("checkpoint: bad magic in " + path);
  }
  const uint32_t version = get_u32(raw, 4);
  if (version != kVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version) +
                          " in " + path);
  }
  const uint64_t header_len = get_u64(raw, 8);
  if (16 + header_len > raw.size()) {
    throw CheckpointError("checkpoint: truncated header in " + path);
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw.substr(16, header_len));
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint: bad header in " + path + ": " + e.what());
  }

  Checkpoint out;
  out.config = model_config_from_json(header.at("config"));
  out.vocab = Vocab::from_json(header.at("vocab").dump());

  const size_t payload_at = 16 + header_len;
  const uint64_t payload_size = raw.size() - payload_at;
  uint64_t expected = 0;
  std::vector<std::pair<uint64_t, uint64_t>> spans;  // (offset, bytes)
  for (const auto& [name, entry] : header.at("manifest").items()) {
    if (entry.at("dtype").get<std::string>() != "f32") {
      throw CheckpointError("checkpoint: unsupported dtype for '" + name + "' in " + path);
    }
    Shape shape = entry.at("shape").get<Shape>();
    const uint64_t offset = entry.at("offset").get<uint64_t>();
    const uint64_t bytes = uint64_t(numel_of(shape)) * sizeof(float);
    if (offset + bytes > payload_size) {
      throw CheckpointError("checkpoint: manifest entry '" + name + "' out of bounds in " +
                            path);
    }
    spans.emplace_back(offset, bytes);
    expected += bytes;

    std::vector<float> data(size_t(numel_of(shape)));
    std::memcpy(data.data(), raw.data() + payload_at + offset, size_t(bytes));
    out.state.add(name, TensorF::from_vector(std::move(shape), std::move(data)),
                  entry.at("frozen").get<bool>());
  }
  if (expected != payload_size) {
    throw CheckpointError("checkpoint: manifest/payload length mismatch in " + path);
  }
  std::sort(spans.begin(), spans.end());
  for (size_t i = 1; i < spans.size(); ++i) {
    if (spans[i - 1].first + spans[i - 1].second > spans[i].first) {
      throw CheckpointError("checkpoint: overlapping manifest offsets in " + path);
    }
  }
  return out;
}

}  // namespace mpath
