#include <cmath>
#include <set>

#include "doctest.h"
#include "mpath/reports.hpp"
#include "mpath/rng.hpp"

using namespace mpath;

namespace {

Taxonomy default_taxonomy() { return Taxonomy::load(default_taxonomy_path()); }

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("breast fixture parses into header and single finding") {
  const auto r = parse_report(
      "Breast, core-needle biopsy; Invasive carcinoma of no special type, grade II "
      "(Tubule formation: 3, Nuclear grade: 2, Mitoses: 1)");
  CHECK(r.organ == Organ::kBreast);
  CHECK(r.sample_type == "core-needle biopsy");
  REQUIRE(r.findings.size() == 1);
  CHECK(r.findings[0] ==
        "Invasive carcinoma of no special type, grade II (Tubule formation: 3, Nuclear grade: "
        "2, Mitoses: 1)");
  CHECK_FALSE(r.note.has_value());
}

TEST_CASE("lung fixture parses") {
  const auto r = parse_report("Lung, biopsy; Adenocarcinoma");
  CHECK(r.organ == Organ::kLung);
  CHECK(r.sample_type == "biopsy");
  CHECK(r.findings == std::vector<std::string>{"Adenocarcinoma"});
}

TEST_CASE("bladder fixture captures the note") {
  const auto r = parse_report(
      "Urinary bladder, transurethral resection; Invasive urothelial carcinoma, with "
      "involvement of subepithelial connective tissue Note) The specimen includes muscle "
      "proper.");
  CHECK(r.organ == Organ::kBladder);
  CHECK(r.sample_type == "transurethral resection");
  REQUIRE(r.findings.size() == 1);
  REQUIRE(r.note.has_value());
  CHECK(*r.note == "The specimen includes muscle proper.");
}

TEST_CASE("numbered findings split sequentially") {
  const auto r = parse_report(
      "Breast, sono-guided core biopsy;  1. Invasive carcinoma of no special type, grade I "
      "(Tubule formation: 2, Nuclear grade: 2, Mitoses: 1)  2. Ductal carcinoma in situ  3. "
      "Microcalcification");
  REQUIRE(r.findings.size() == 3);
  CHECK(r.findings[1] == "Ductal carcinoma in situ");
  CHECK(r.findings[2] == "Microcalcification");
}

TEST_CASE("render single and numbered forms") {
  StructuredReport lung{Organ::kLung, "biopsy", {"Adenocarcinoma"}, std::nullopt};
  CHECK(render_report(lung) == "Lung, biopsy; Adenocarcinoma");

  StructuredReport breast{Organ::kBreast,
                          "core-needle biopsy",
                          {"Invasive carcinoma of no special type, grade I",
                           "Ductal carcinoma in situ", "Microcalcification"},
                          std::nullopt};
  CHECK(render_report(breast) ==
        "Breast, core-needle biopsy; 1. Invasive carcinoma of no special type, grade I 2. "
        "Ductal carcinoma in situ 3. Microcalcification");

  StructuredReport bladder{Organ::kBladder,
                           "transurethral resection",
                           {"Invasive urothelial carcinoma"},
                           "The specimen includes muscle proper."};
  CHECK(render_report(bladder) ==
        "Urinary bladder, transurethral resection; Invasive urothelial carcinoma Note) The "
        "specimen includes muscle proper.");
}

TEST_CASE("parse errors carry byte offsets") {
  CHECK_THROWS_AS(parse_report("Lung, biopsy Adenocarcinoma"), MalformedReport);
  CHECK_THROWS_AS(parse_report("Spleen, biopsy; Normal"), MalformedReport);
  try {
    parse_report("Spleen, biopsy; Normal");
  } catch (const MalformedReport& e) {
    CHECK(e.offset() == 0);
  }
  try {
    parse_report("Lung, biopsy Adenocarcinoma");
  } catch (const MalformedReport& e) {
    CHECK(e.offset() == std::string("Lung, biopsy Adenocarcinoma").size());
  }
}

TEST_CASE("parse-render round trip on 1000 random reports") {
  const auto tax = default_taxonomy();
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    StructuredReport r;
    r.organ = static_cast<Organ>(rng.below(kNumOrgans));
    const auto& sts = tax.sample_types_by_organ[static_cast<size_t>(r.organ)];
    const auto& fds = tax.findings_by_organ[static_cast<size_t>(r.organ)];
    r.sample_type = sts[rng.below(sts.size())];
    const size_t nf = 1 + rng.below(3);
    std::set<size_t> chosen;
    while (chosen.size() < std::min(nf, fds.size())) chosen.insert(rng.below(fds.size()));
    for (size_t f : chosen) r.findings.push_back(fds[f]);
    if (rng.uniform() < 0.25) r.note = "The specimen includes muscle proper.";
    const auto rendered = render_report(r);
    CHECK(parse_report(rendered) == r);
    // canonical form is idempotent on its image
    CHECK(render_report(parse_report(rendered)) == rendered);
  }
}

TEST_CASE("corpus generation is deterministic per seed") {
  CorpusConfig cfg;
  cfg.n_samples = 25;
  cfg.d_v = 32;
  cfg.noise_sigma = 0.05;
  cfg.seed = 7;
  cfg.taxonomy = default_taxonomy();
  const auto a = synthesize_corpus(cfg);
  const auto b = synthesize_corpus(cfg);
  REQUIRE(a.size() == 25);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].report_text == b[i].report_text);
    CHECK(a[i].features == b[i].features);
  }
}

TEST_CASE("corpus size and organ marginal at full scale") {
  CorpusConfig cfg;
  cfg.n_samples = 7385;
  cfg.d_v = 8;  // keep the test light; labels do not depend on d_v
  cfg.noise_sigma = 0.0;
  cfg.seed = 7;
  cfg.taxonomy = default_taxonomy();
  const auto corpus = synthesize_corpus(cfg);
  REQUIRE(corpus.size() == 7385);
  std::vector<int> counts(kNumOrgans, 0);
  for (const auto& s : corpus) counts[static_cast<size_t>(s.labels.organ_id)]++;
  for (int c : counts) {
    const double frac = double(c) / 7385.0;
    CHECK(std::abs(frac - 1.0 / 7) < 0.03);
  }
  // every sample's report text is in canonical form
  for (size_t i = 0; i < corpus.size(); i += 500) {
    CHECK(render_report(parse_report(corpus[i].report_text)) == corpus[i].report_text);
  }
}

TEST_CASE("zero noise reproduces the prototype exactly") {
  CorpusConfig cfg;
  cfg.n_samples = 40;
  cfg.d_v = 64;
  cfg.noise_sigma = 0.0;
  cfg.seed = 13;
  cfg.taxonomy = default_taxonomy();
  const auto corpus = synthesize_corpus(cfg);
  // identical labels must give identical features
  for (size_t i = 0; i < corpus.size(); ++i) {
    for (size_t j = i + 1; j < corpus.size(); ++j) {
      if (corpus[i].labels.organ_id == corpus[j].labels.organ_id &&
          corpus[i].labels.sample_type_id == corpus[j].labels.sample_type_id &&
          corpus[i].labels.finding_ids == corpus[j].labels.finding_ids) {
        CHECK(corpus[i].features == corpus[j].features);
      }
    }
  }
  // and match make_feature_vector directly
  Rng noise(0);
  const auto direct = make_feature_vector(corpus[0].labels, cfg, noise);
  CHECK(direct == corpus[0].features);
}

TEST_CASE("features are unit norm") {
  CorpusConfig cfg;
  cfg.n_samples = 30;
  cfg.d_v = 768;
  cfg.noise_sigma = 0.1;
  cfg.seed = 3;
  cfg.taxonomy = default_taxonomy();
  for (const auto& s : synthesize_corpus(cfg)) {
    REQUIRE(s.features.size() == 768);
    double n2 = 0;
    for (float v : s.features) n2 += double(v) * v;
    CHECK(std::abs(std::sqrt(n2) - 1.0) < 1e-6);
  }
}

TEST_CASE("organ prototypes are well separated for the default seed") {
  const auto tax = default_taxonomy();
  FeatureSynth synth(tax, 768, 7);
  for (int a = 0; a < kNumOrgans; ++a) {
    for (int b = a + 1; b < kNumOrgans; ++b) {
      CHECK(cosine(synth.organ_prototype(a), synth.organ_prototype(b)) < 0.99);
    }
  }
}

TEST_CASE("corpus config is validated") {
  CorpusConfig cfg;
  cfg.n_samples = 5;  // below the minimum of 10
  cfg.seed = 1;
  cfg.taxonomy = default_taxonomy();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.n_samples = 10;
  cfg.noise_sigma = -0.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("taxonomy must cover every organ") {
  CHECK_THROWS_WITH_AS(Taxonomy::from_json_text(R"({"organs":{"breast":{
      "sample_types":["biopsy"],"findings":["Fibroadenoma"]}}})"),
                       doctest::Contains("missing"), std::invalid_argument);
}

TEST_CASE("corpus jsonl round trip") {
  CorpusConfig cfg;
  cfg.n_samples = 12;
  cfg.d_v = 16;
  cfg.noise_sigma = 0.0;
  cfg.seed = 5;
  cfg.taxonomy = default_taxonomy();
  const auto corpus = synthesize_corpus(cfg);
  const std::string path = "test_corpus_roundtrip.jsonl";
  write_corpus_jsonl(path, corpus);
  const auto back = read_corpus_jsonl(path, cfg.taxonomy);
  REQUIRE(back.size() == corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].id == corpus[i].id);
    CHECK(back[i].report_text == corpus[i].report_text);
    CHECK(back[i].features == corpus[i].features);
    CHECK(back[i].labels.organ_id == corpus[i].labels.organ_id);
    CHECK(back[i].labels.sample_type_id == corpus[i].labels.sample_type_id);
    CHECK(back[i].labels.finding_ids == corpus[i].labels.finding_ids);
  }
  std::remove(path.c_str());
}
