#include "mpath/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "mpath/sha256.hpp"
#include "mpath/tokenizer.hpp"

namespace mpath {

namespace {

// modified n-gram counts keyed on separator-joined tokens
std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& toks,
                                                  size_t n) {
  std::unordered_map<std::string, int> counts;
  if (toks.size() < n) return counts;
  for (size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key = toks[i];
    for (size_t j = 1; j < n; ++j) {
      key.push_back('\x1f');
      key += toks[i + j];
    }
    ++counts[key];
  }
  return counts;
}

const std::set<std::string>& builtin_stopwords() {
  static const std::set<std::string> words = {"a",  "an", "and", "are", "by",  "for",
                                              "from", "in", "is",  "no",  "of",  "on",
                                              "or", "the", "to",  "was", "were", "with"};
  return words;
}

std::string normalized_join(const std::string& text) {
  const auto toks = normalize_tokens(text);
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

}  // namespace

double bleu4(const std::string& candidate, const std::string& reference) {
  const auto cand = normalize_tokens(candidate);
  const auto ref = normalize_tokens(reference);
  if (cand.empty()) return 0.0;

  double log_sum = 0.0;
  for (size_t n = 1; n <= 4; ++n) {
    const auto cc = ngram_counts(cand, n);
    const auto rc = ngram_counts(ref, n);
    if (cc.empty()) continue;  // no candidate n-grams of this order: factor 1
    double total = 0.0, matched = 0.0;
    for (const auto& [gram, cnt] : cc) {
      total += cnt;
      auto it = rc.find(gram);
      if (it != rc.end()) matched += std::min(cnt, it->second);
    }
    if (matched == 0.0) matched = 1.0 / (2.0 * total);  // documented smoothing floor
    log_sum += std::log(matched / total);
  }
  const double brevity =
      std::exp(std::min(0.0, 1.0 - double(ref.size()) / double(cand.size())));
  return brevity * std::exp(log_sum / 4.0);
}

double rouge_l_f1(const std::string& candidate, const std::string& reference) {
  const auto cand = normalize_tokens(candidate);
  const auto ref = normalize_tokens(reference);
  if (cand.empty() && ref.empty()) return 1.0;
  if (cand.empty() || ref.empty()) return 0.0;

  const size_t m = cand.size(), n = ref.size();
  std::vector<int> prev(n + 1, 0), cur(n + 1, 0);
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      if (cand[i - 1] == ref[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[n];
  if (lcs == 0.0) return 0.0;
  const double p = lcs / double(m);
  const double r = lcs / double(n);
  return 2.0 * p * r / (p + r);
}

std::string default_lexicon_path() { return std::string(MPATH_DATA_DIR) + "/lexicon.txt"; }

KeywordLexicon KeywordLexicon::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("lexicon: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

KeywordLexicon KeywordLexicon::from_text(const std::string& text) {
  KeywordLexicon lex;
  lex.stopwords = builtin_stopwords();
  lex.sha256 = sha256_hex(text);
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string term = normalized_join(line);
    if (term.empty()) continue;
    if (lex.stopwords.count(term)) {
      throw std::invalid_argument("lexicon: term '" + term + "' is a stopword");
    }
    lex.terms.insert(term);
  }
  if (lex.terms.empty()) throw std::invalid_argument("lexicon: no terms");
  return lex;
}

std::set<std::string> extract_keywords(const std::string& text, const KeywordLexicon& lex) {
  std::vector<std::string> toks;
  for (auto& t : normalize_tokens(text)) {
    if (!is_punct_token(t)) toks.push_back(std::move(t));
  }
  std::set<std::string> out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (lex.terms.count(toks[i]) && !lex.stopwords.count(toks[i])) out.insert(toks[i]);
    if (i + 1 < toks.size()) {
      const std::string bigram = toks[i] + " " + toks[i + 1];
      if (lex.terms.count(bigram)) out.insert(bigram);
    }
  }
  return out;
}

double key_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const size_t uni = a.size() + b.size() - inter;
  return double(inter) / double(uni);
}

double emb_similarity(const std::string& candidate, const std::string& reference) {
  const std::string a = normalized_join(candidate);
  const std::string b = normalized_join(reference);
  if (a == b) return 1.0;
  if (a.size() < 3 || b.size() < 3) return 0.0;

  std::unordered_map<std::string, int> ca, cb;
  for (size_t i = 0; i + 3 <= a.size(); ++i) ++ca[a.substr(i, 3)];
  for (size_t i = 0; i + 3 <= b.size(); ++i) ++cb[b.substr(i, 3)];
  double dot = 0, na = 0, nb = 0;
  for (const auto& [gram, cnt] : ca) {
    na += double(cnt) * cnt;
    auto it = cb.find(gram);
    if (it != cb.end()) dot += double(cnt) * it->second;
  }
  for (const auto& [gram, cnt] : cb) nb += double(cnt) * cnt;
  const double cos = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(cos, 0.0, 1.0);
}

double composite_score(double bleu, double rouge, double key, double emb) {
  for (double v : {bleu, rouge, key, emb}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::domain_error("composite_score: component " + std::to_string(v) +
                              " outside [0,1]");
    }
  }
  return 0.15 * (rouge + bleu) + 0.4 * key + 0.3 * emb;
}

ScoreBreakdown score_pair(const std::string& candidate, const std::string& reference,
                          const ScoreContext& ctx) {
  ScoreBreakdown s;
  s.bleu4 = bleu4(candidate, reference);
  s.rouge_l_f1 = rouge_l_f1(candidate, reference);
  s.key = key_jaccard(extract_keywords(candidate, ctx.lexicon),
                      extract_keywords(reference, ctx.lexicon));
  if (ctx.emb_backend == EmbBackend::kTrigram) {
    s.emb = emb_similarity(candidate, reference);
  } else {
    if (!ctx.emb_model) {
      throw std::runtime_error("score_pair: model embedding backend not configured");
    }
    s.emb = std::clamp(ctx.emb_model(candidate, reference), 0.0, 1.0);
  }
  s.composite = composite_score(s.bleu4, s.rouge_l_f1, s.key, s.emb);
  return s;
}

int eval_thread_count(size_t n_items) {
  int threads = 0;
  if (const char* env = std::getenv("MPATH_THREADS")) {
    threads = std::atoi(env);
  }
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  threads = std::min(threads, 16);
  threads = std::min<int>(threads, static_cast<int>(std::max<size_t>(n_items, 1)));
  return std::max(threads, 1);
}

CorpusScore score_corpus(std::span<const PairRecord> pairs, const ScoreContext& ctx) {
  CorpusScore out;
  std::vector<ScoreBreakdown> scores(pairs.size());
  const int threads = eval_thread_count(pairs.size());
  if (threads <= 1 || pairs.size() < 2) {
    for (size_t i = 0; i < pairs.size(); ++i) {
      scores[i] = score_pair(pairs[i].generated, pairs[i].reference, ctx);
    }
  } else {
    std::vector<std::thread> workers;
    std::atomic<size_t> next{0};
    for (int t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        size_t i;
        while ((i = next.fetch_add(1)) < pairs.size()) {
          scores[i] = score_pair(pairs[i].generated, pairs[i].reference, ctx);
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  // deterministic input-order reduction
  for (size_t i = 0; i < pairs.size(); ++i) {
    out.pairs.emplace_back(pairs[i].id, scores[i]);
    out.mean.bleu4 += scores[i].bleu4;
    out.mean.rouge_l_f1 += scores[i].rouge_l_f1;
    out.mean.key += scores[i].key;
    out.mean.emb += scores[i].emb;
    out.mean.composite += scores[i].composite;
  }
  if (!pairs.empty()) {
    const double inv = 1.0 / double(pairs.size());
    out.mean.bleu4 *= inv;
    out.mean.rouge_l_f1 *= inv;
    out.mean.key *= inv;
    out.mean.emb *= inv;
    out.mean.composite *= inv;
  }
  return out;
}

std::vector<PairRecord> read_pairs_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pairs: cannot open " + path);
  std::vector<PairRecord> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("generated").get<std::string>(),
                     j.at("reference").get<std::string>()});
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mpath
