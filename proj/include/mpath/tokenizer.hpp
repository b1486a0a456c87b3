#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mpath {

// Normalization shared by the model and the metrics: lowercase, split on
// whitespace, and split each of ; , : ( ) % . off as its own token.
std::vector<std::string> normalize_tokens(std::string_view text);

bool is_punct_token(std::string_view token);

// joins tokens with single spaces, omitting the space before punctuation
std::string join_tokens(std::span<const std::string> tokens);

struct Vocab {
  static constexpr int32_t kPad = 0;
  static constexpr int32_t kBos = 1;
  static constexpr int32_t kEos = 2;
  static constexpr int32_t kUnk = 3;

  std::vector<std::string> id_to_token;  // includes the four specials
  std::unordered_map<std::string, int32_t> token_to_id;
  int min_count = 1;

  int32_t size() const { return static_cast<int32_t>(id_to_token.size()); }
  int32_t lookup(const std::string& token) const;
  const std::string& token(int32_t id) const;

  std::string to_json() const;
  static Vocab from_json(const std::string& text);
};

// Tokens with count >= min_count, ordered by (count desc, token asc) after
// the specials. Deterministic and order-independent w.r.t. corpus permutation.
Vocab build_vocab(std::span<const std::string> corpus, int min_count);

std::vector<int32_t> encode(std::string_view text, const Vocab& vocab, bool add_specials);
std::string decode(std::span<const int32_t> ids, const Vocab& vocab);

}  // namespace mpath
