#include "mpath/reports.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace mpath {

namespace {

const char* kOrganKeys[kNumOrgans] = {"breast", "bladder", "cervix",  "colon",
                                      "lung",   "prostate", "stomach"};
const char* kOrganDisplay[kNumOrgans] = {"Breast", "Urinary bladder", "Cervix", "Colon",
                                         "Lung",   "Prostate",        "Stomach"};

std::string collapse_ws(std::string_view s) {
  std::string out;
  bool in_space = true;  // also trims leading whitespace
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
    } else {
      if (in_space && !out.empty()) out.push_back(' ');
      in_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view organ_key(Organ o) { return kOrganKeys[static_cast<int>(o)]; }
std::string_view organ_display(Organ o) { return kOrganDisplay[static_cast<int>(o)]; }

std::optional<Organ> parse_organ_name(std::string_view name) {
  const std::string n = lower(collapse_ws(name));
  if (n == "urinary bladder") return Organ::kBladder;
  for (int i = 0; i < kNumOrgans; ++i) {
    if (n == kOrganKeys[i] || n == lower(kOrganDisplay[i])) return static_cast<Organ>(i);
  }
  return std::nullopt;
}

StructuredReport parse_report(std::string_view text) {
  const size_t semi = text.find(';');
  if (semi == std::string_view::npos) {
    throw MalformedReport("report is missing ';'", text.size());
  }
  const std::string header = collapse_ws(text.substr(0, semi));
  const size_t comma = header.find(',');
  std::string organ_text, sample_type;
  if (comma == std::string::npos) {
    organ_text = header;
  } else {
    organ_text = collapse_ws(std::string_view(header).substr(0, comma));
    sample_type = collapse_ws(std::string_view(header).substr(comma + 1));
  }
  const auto organ = parse_organ_name(organ_text);
  if (!organ) {
    throw MalformedReport("unrecognized organ '" + organ_text + "'", 0);
  }

  std::string body = collapse_ws(text.substr(semi + 1));
  std::optional<std::string> note;
  const size_t note_pos = body.find("Note)");
  if (note_pos != std::string::npos) {
    std::string note_text = collapse_ws(std::string_view(body).substr(note_pos + 5));
    if (!note_text.empty()) note = std::move(note_text);
    body = collapse_ws(std::string_view(body).substr(0, note_pos));
  }
  if (body.empty()) {
    throw MalformedReport("report has no findings", semi + 1);
  }

  std::vector<std::string> findings;
  if (body.rfind("1. ", 0) == 0) {
    size_t cur = 3;
    int next = 2;
    while (true) {
      const std::string pat = " " + std::to_string(next) + ". ";
      const size_t p = body.find(pat, cur);
      if (p == std::string::npos) {
        findings.push_back(collapse_ws(std::string_view(body).substr(cur)));
        break;
      }
      findings.push_back(collapse_ws(std::string_view(body).substr(cur, p - cur)));
      cur = p + pat.size();
      ++next;
    }
  } else {
    findings.push_back(body);
  }
  for (const auto& f : findings) {
    if (f.empty()) throw MalformedReport("empty finding clause", semi + 1);
  }

  StructuredReport r;
  r.organ = *organ;
  r.sample_type = sample_type;
  r.findings = std::move(findings);
  r.note = std::move(note);
  return r;
}

std::string render_report(const StructuredReport& r) {
  if (r.findings.empty()) {
    throw std::invalid_argument("render_report: findings must be non-empty");
  }
  std::string out(organ_display(r.organ));
  out += ", ";
  out += r.sample_type;
  out += "; ";
  if (r.findings.size() == 1) {
    out += r.findings[0];
  } else {
    for (size_t i = 0; i < r.findings.size(); ++i) {
      if (i > 0) out.push_back(' ');
      out += std::to_string(i + 1) + ". " + r.findings[i];
    }
  }
  if (r.note && !r.note->empty()) {
    out += " Note) " + *r.note;
  }
  return out;
}

std::string default_taxonomy_path() { return std::string(MPATH_DATA_DIR) + "/taxonomy.json"; }

Taxonomy Taxonomy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("taxonomy: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

Taxonomy Taxonomy::from_json_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const auto& organs = j.at("organs");
  Taxonomy t;
  t.sample_types_by_organ.resize(kNumOrgans);
  t.findings_by_organ.resize(kNumOrgans);
  t.sample_type_ids_by_organ.resize(kNumOrgans);
  t.finding_ids_by_organ.resize(kNumOrgans);

  std::unordered_map<std::string, int32_t> st_index, fd_index;
  for (int o = 0; o < kNumOrgans; ++o) {
    const std::string key(kOrganKeys[o]);
    if (!organs.contains(key)) {
      throw std::invalid_argument("taxonomy: missing entries for organ '" + key + "'");
    }
    const auto& node = organs.at(key);
    for (const auto& st : node.at("sample_types")) {
      const auto s = st.get<std::string>();
      t.sample_types_by_organ[o].push_back(s);
      auto [it, inserted] = st_index.try_emplace(s, static_cast<int32_t>(t.sample_types.size()));
      if (inserted) t.sample_types.push_back(s);
      t.sample_type_ids_by_organ[o].push_back(it->second);
    }
    for (const auto& fd : node.at("findings")) {
      const auto f = fd.get<std::string>();
      t.findings_by_organ[o].push_back(f);
      auto [it, inserted] = fd_index.try_emplace(f, static_cast<int32_t>(t.findings.size()));
      if (inserted) t.findings.push_back(f);
      t.finding_ids_by_organ[o].push_back(it->second);
    }
    if (t.sample_types_by_organ[o].empty() || t.findings_by_organ[o].empty()) {
      throw std::invalid_argument("taxonomy: missing entries for organ '" + key + "'");
    }
  }
  return t;
}

void CorpusConfig::validate() const {
  if (n_samples < 10) {
    throw std::invalid_argument("corpus: n_samples must be >= 10, got " +
                                std::to_string(n_samples));
  }
  if (noise_sigma < 0) {
    throw std::invalid_argument("corpus: noise_sigma must be >= 0");
  }
  if (d_v < 1) {
    throw std::invalid_argument("corpus: d_v must be >= 1");
  }
  if (taxonomy.sample_types.empty()) {
    throw std::invalid_argument("corpus: taxonomy not loaded");
  }
}

namespace {
constexpr uint64_t kProjectionStream = 0xa5a5a5a5deadbeefULL;
}

FeatureSynth::FeatureSynth(const Taxonomy& taxonomy, int64_t d_v, uint64_t corpus_seed)
    : d_v_(d_v),
      onehot_dim_(taxonomy.onehot_dim()),
      n_sample_types_(taxonomy.n_sample_types()),
      projection_(static_cast<size_t>(d_v * taxonomy.onehot_dim())) {
  Rng rng(Rng::derive(corpus_seed, kProjectionStream));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_v));
  for (auto& v : projection_) v = static_cast<float>(rng.normal() * scale);
}

std::vector<float> FeatureSynth::features(const ReportLabels& labels, double noise_sigma,
                                          Rng& noise_rng) const {
  std::vector<double> acc(static_cast<size_t>(d_v_), 0.0);
  auto add_column = [&](int64_t k) {
    for (int64_t j = 0; j < d_v_; ++j) {
      acc[j] += projection_[static_cast<size_t>(j * onehot_dim_ + k)];
    }
  };
  add_column(labels.organ_id);
  add_column(kNumOrgans + labels.sample_type_id);
  for (int32_t f : labels.finding_ids) add_column(kNumOrgans + n_sample_types_ + f);
  if (noise_sigma > 0) {
    for (auto& v : acc) v += noise_sigma * noise_rng.normal();
  }
  double norm2 = 0;
  for (double v : acc) norm2 += v * v;
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(acc.size());
  for (size_t j = 0; j < acc.size(); ++j) out[j] = static_cast<float>(acc[j] * inv);
  return out;
}

std::vector<float> FeatureSynth::organ_prototype(int32_t organ_id) const {
  std::vector<float> out(static_cast<size_t>(d_v_));
  for (int64_t j = 0; j < d_v_; ++j) {
    out[static_cast<size_t>(j)] = projection_[static_cast<size_t>(j * onehot_dim_ + organ_id)];
  }
  return out;
}

std::vector<float> make_feature_vector(const ReportLabels& labels, const CorpusConfig& cfg,
                                       Rng& noise_rng) {
  FeatureSynth synth(cfg.taxonomy, cfg.d_v, cfg.seed);
  return synth.features(labels, cfg.noise_sigma, noise_rng);
}

std::vector<PairedSample> synthesize_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  const Taxonomy& tax = cfg.taxonomy;
  FeatureSynth synth(tax, cfg.d_v, cfg.seed);

  std::vector<PairedSample> out;
  out.reserve(static_cast<size_t>(cfg.n_samples));
  for (int64_t i = 0; i < cfg.n_samples; ++i) {
    Rng rng(Rng::derive(cfg.seed, static_cast<uint64_t>(i)));
    const int organ = static_cast<int>(rng.below(kNumOrgans));
    const auto& st_ids = tax.sample_type_ids_by_organ[organ];
    const auto& fd_ids = tax.finding_ids_by_organ[organ];
    ReportLabels labels;
    labels.organ_id = organ;
    labels.sample_type_id = st_ids[rng.below(st_ids.size())];
    const size_t want = std::min<size_t>(1 + rng.below(3), fd_ids.size());
    std::set<int32_t> chosen;  // ascending global ids -> canonical finding order
    while (chosen.size() < want) chosen.insert(fd_ids[rng.below(fd_ids.size())]);
    labels.finding_ids.assign(chosen.begin(), chosen.end());

    StructuredReport r;
    r.organ = static_cast<Organ>(organ);
    r.sample_type = tax.sample_types[labels.sample_type_id];
    for (int32_t f : labels.finding_ids) r.findings.push_back(tax.findings[f]);

    PairedSample s;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%06lld", static_cast<long long>(i));
    s.id = buf;
    s.labels = labels;
    s.report_text = render_report(r);
    s.features = synth.features(labels, cfg.noise_sigma, rng);
    out.push_back(std::move(s));
  }
  return out;
}

void write_corpus_jsonl(const std::string& path, std::span<const PairedSample> samples) {
  std::ofstream outf(path, std::ios::binary);
  if (!outf) throw std::runtime_error("corpus: cannot write " + path);
  for (const auto& s : samples) {
    nlohmann::json j;
    j["id"] = s.id;
    j["features"] = std::vector<double>(s.features.begin(), s.features.end());
    j["report"] = s.report_text;
    j["organ"] = std::string(organ_key(static_cast<Organ>(s.labels.organ_id)));
    const auto parsed = parse_report(s.report_text);
    j["sample_type"] = parsed.sample_type;
    j["findings"] = parsed.findings;
    if (parsed.note) j["note"] = *parsed.note;
    outf << j.dump() << "\n";
  }
}

std::vector<PairedSample> read_corpus_jsonl(const std::string& path, const Taxonomy& taxonomy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("corpus: cannot open " + path);
  std::unordered_map<std::string, int32_t> st_index, fd_index;
  for (int32_t i = 0; i < taxonomy.n_sample_types(); ++i) st_index[taxonomy.sample_types[i]] = i;
  for (int32_t i = 0; i < taxonomy.n_findings(); ++i) fd_index[taxonomy.findings[i]] = i;

  std::vector<PairedSample> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad JSON: " + e.what());
    }
    PairedSample s;
    s.id = j.at("id").get<std::string>();
    for (const auto& v : j.at("features")) s.features.push_back(v.get<float>());
    s.report_text = j.at("report").get<std::string>();
    const auto organ = parse_organ_name(j.at("organ").get<std::string>());
    if (!organ) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown organ");
    }
    s.labels.organ_id = static_cast<int32_t>(*organ);
    const auto st = j.at("sample_type").get<std::string>();
    auto st_it = st_index.find(st);
    if (st_it == st_index.end()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": sample type not in taxonomy: " + st);
    }
    s.labels.sample_type_id = st_it->second;
    for (const auto& f : j.at("findings")) {
      auto fd_it = fd_index.find(f.get<std::string>());
      if (fd_it == fd_index.end()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": finding not in taxonomy: " + f.get<std::string>());
      }
      s.labels.finding_ids.push_back(fd_it->second);
    }
    std::sort(s.labels.finding_ids.begin(), s.labels.finding_ids.end());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mpath
