#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mpath/rng.hpp"

namespace mpath {

enum class Organ : int {
  kBreast = 0,
  kBladder,
  kCervix,
  kColon,
  kLung,
  kProstate,
  kStomach,
};
inline constexpr int kNumOrgans = 7;

// lowercase key used in data files and labels
std::string_view organ_key(Organ o);
// header form used in report text ("Urinary bladder" for the bladder)
std::string_view organ_display(Organ o);
// case-insensitive; accepts keys, display names and "urinary bladder"
std::optional<Organ> parse_organ_name(std::string_view name);

struct StructuredReport {
  Organ organ = Organ::kBreast;
  std::string sample_type;
  std::vector<std::string> findings;
  std::optional<std::string> note;

  bool operator==(const StructuredReport&) const = default;
};

class MalformedReport : public std::runtime_error {
 public:
  MalformedReport(const std::string& msg, size_t offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

// Grammar: "<Organ>, <sample type>; <findings>[ Note) <note>]" where findings
// is one free-text clause or a numbered "1. ... 2. ..." list. Whitespace runs
// collapse to single spaces, so parse-then-render is a canonical form.
StructuredReport parse_report(std::string_view text);
std::string render_report(const StructuredReport& r);

struct Taxonomy {
  // indexed by organ
  std::vector<std::vector<std::string>> sample_types_by_organ;
  std::vector<std::vector<std::string>> findings_by_organ;
  // global label spaces (deduplicated, organ order then file order)
  std::vector<std::string> sample_types;
  std::vector<std::string> findings;
  // per-organ lists as indices into the global spaces
  std::vector<std::vector<int32_t>> sample_type_ids_by_organ;
  std::vector<std::vector<int32_t>> finding_ids_by_organ;

  static Taxonomy load(const std::string& path);
  static Taxonomy from_json_text(const std::string& text);

  int32_t n_sample_types() const { return static_cast<int32_t>(sample_types.size()); }
  int32_t n_findings() const { return static_cast<int32_t>(findings.size()); }
  int64_t onehot_dim() const { return kNumOrgans + n_sample_types() + n_findings(); }
};

std::string default_taxonomy_path();

struct ReportLabels {
  int32_t organ_id = 0;
  int32_t sample_type_id = 0;          // global id
  std::vector<int32_t> finding_ids;    // global ids, ascending
};

struct PairedSample {
  std::string id;
  std::vector<float> features;
  std::string report_text;
  ReportLabels labels;
};

struct CorpusConfig {
  int64_t n_samples = 0;
  int64_t d_v = 768;
  double noise_sigma = 0.1;
  uint64_t seed = 0;
  Taxonomy taxonomy;

  void validate() const;
};

// Deterministic map from labels to feature vectors: a seed-derived random
// projection of the concatenated one-hot blocks (organ | sample type |
// findings multi-hot), plus Gaussian noise, L2-normalized.
class FeatureSynth {
 public:
  FeatureSynth(const Taxonomy& taxonomy, int64_t d_v, uint64_t corpus_seed);
  std::vector<float> features(const ReportLabels& labels, double noise_sigma,
                              Rng& noise_rng) const;
  // noiseless prototype for a bare organ one-hot (cosine diagnostics)
  std::vector<float> organ_prototype(int32_t organ_id) const;

 private:
  int64_t d_v_;
  int64_t onehot_dim_;
  int32_t n_sample_types_;
  std::vector<float> projection_;  // (d_v, onehot_dim) row-major
};

std::vector<float> make_feature_vector(const ReportLabels& labels, const CorpusConfig& cfg,
                                       Rng& noise_rng);

std::vector<PairedSample> synthesize_corpus(const CorpusConfig& cfg);

// JSON-Lines corpus interchange; one sample per line, LF endings
void write_corpus_jsonl(const std::string& path, std::span<const PairedSample> samples);
std::vector<PairedSample> read_corpus_jsonl(const std::string& path, const Taxonomy& taxonomy);

}  // namespace mpath
