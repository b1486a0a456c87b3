#pragma once

#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace mpath {

struct ScoreBreakdown {
  double bleu4 = 0.0;
  double rouge_l_f1 = 0.0;
  double key = 0.0;
  double emb = 0.0;
  double composite = 0.0;
};

// BLEU-4: geometric mean of modified 1..4-gram precisions times the brevity
// penalty exp(min(0, 1 - r/c)). An order with zero matches is smoothed by
// substituting 1/(2 * total_ngrams_n) for the match count; an order with no
// candidate n-grams contributes a factor of 1. Empty candidate scores 0.
double bleu4(const std::string& candidate, const std::string& reference);

// ROUGE-L F1 over token LCS; both-empty scores 1, one-sided empty scores 0.
double rouge_l_f1(const std::string& candidate, const std::string& reference);

struct KeywordLexicon {
  std::set<std::string> terms;      // normalized unigrams and bigrams
  std::set<std::string> stopwords;  // disjoint from terms
  std::string sha256;               // fingerprint of the source file

  static KeywordLexicon load(const std::string& path);
  static KeywordLexicon from_text(const std::string& text);
};

std::string default_lexicon_path();

std::set<std::string> extract_keywords(const std::string& text, const KeywordLexicon& lex);

// |a∩b| / |a∪b|; both empty -> 1
double key_jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

enum class EmbBackend { kTrigram, kModel };

// Character-trigram cosine over tokenizer-normalized text (default backend).
double emb_similarity(const std::string& candidate, const std::string& reference);

// 0.15*(rouge + bleu) + 0.4*key + 0.3*emb; every component must be in [0,1]
double composite_score(double bleu, double rouge, double key, double emb);

struct ScoreContext {
  KeywordLexicon lexicon;
  EmbBackend emb_backend = EmbBackend::kTrigram;
  // mean-pooled token-embedding backend, set when emb_backend == kModel
  std::function<double(const std::string&, const std::string&)> emb_model;
};

ScoreBreakdown score_pair(const std::string& candidate, const std::string& reference,
                          const ScoreContext& ctx);

struct PairRecord {
  std::string id;
  std::string generated;
  std::string reference;
};

struct CorpusScore {
  ScoreBreakdown mean;
  std::vector<std::pair<std::string, ScoreBreakdown>> pairs;  // input order
};

// Parallel across pairs (capped by MPATH_THREADS), reduced in input order.
CorpusScore score_corpus(std::span<const PairRecord> pairs, const ScoreContext& ctx);

std::vector<PairRecord> read_pairs_jsonl(const std::string& path);

// thread cap honoring the MPATH_THREADS environment variable
int eval_thread_count(size_t n_items);

}  // namespace mpath
