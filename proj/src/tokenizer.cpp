#include "mpath/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace mpath {

namespace {

constexpr std::string_view kPunct = ";,:()%.";

bool is_punct_char(char c) { return kPunct.find(c) != std::string_view::npos; }

}  // namespace

bool is_punct_token(std::string_view token) {
  return token.size() == 1 && is_punct_char(token[0]);
}

std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char raw : text) {
    const unsigned char u = static_cast<unsigned char>(raw);
    if (std::isspace(u)) {
      flush();
    } else if (is_punct_char(raw)) {
      flush();
      out.emplace_back(1, raw);
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  flush();
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && !is_punct_token(tokens[i])) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

int32_t Vocab::lookup(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int32_t id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("vocab: id " + std::to_string(id) + " out of range (size " +
                            std::to_string(size()) + ")");
  }
  return id_to_token[static_cast<size_t>(id)];
}

Vocab build_vocab(std::span<const std::string> corpus, int min_count) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");

  std::map<std::string, int64_t> counts;  // ordered map gives the tie-break for free
  for (const auto& text : corpus) {
    for (auto& tok : normalize_tokens(text)) ++counts[tok];
  }

  std::vector<std::pair<std::string, int64_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocab v;
  v.min_count = min_count;
  v.id_to_token = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (auto& [tok, n] : kept) {
    (void)n;
    v.id_to_token.push_back(tok);
  }
  for (int32_t i = 0; i < v.size(); ++i) v.token_to_id[v.id_to_token[i]] = i;
  return v;
}

std::vector<int32_t> encode(std::string_view text, const Vocab& vocab, bool add_specials) {
  std::vector<int32_t> ids;
  if (add_specials) ids.push_back(Vocab::kBos);
  for (const auto& tok : normalize_tokens(text)) ids.push_back(vocab.lookup(tok));
  if (add_specials) ids.push_back(Vocab::kEos);
  return ids;
}

std::string decode(std::span<const int32_t> ids, const Vocab& vocab) {
  std::vector<std::string> toks;
  for (int32_t id : ids) {
    const std::string& tok = vocab.token(id);
    if (id == Vocab::kPad || id == Vocab::kBos || id == Vocab::kEos || id == Vocab::kUnk) continue;
    toks.push_back(tok);
  }
  return join_tokens(toks);
}

std::string Vocab::to_json() const {
  nlohmann::json j;
  j["tokens"] = std::vector<std::string>(id_to_token.begin() + 4, id_to_token.end());
  j["min_count"] = min_count;
  return j.dump();
}

Vocab Vocab::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Vocab v;
  v.min_count = j.at("min_count").get<int>();
  v.id_to_token = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (const auto& tok : j.at("tokens")) v.id_to_token.push_back(tok.get<std::string>());
  for (int32_t i = 0; i < v.size(); ++i) v.token_to_id[v.id_to_token[i]] = i;
  return v;
}

}  // namespace mpath
