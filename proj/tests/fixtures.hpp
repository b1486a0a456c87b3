#pragma once

#include <array>
#include <string>
#include <utility>

// Ground-truth / generated report pairs used across the metric and parser
// test suites. Pair 2 (bladder) is the interesting one: the generated report
// adds an inflammation clause that the reference does not support, so its
// keyword overlap must stay below 1 while the header fields still agree.
namespace fixtures {

struct ReportPair {
  const char* reference;
  const char* generated;
};

inline constexpr std::array<ReportPair, 5> kReportPairs = {{
    {"Breast, core-needle biopsy; Invasive carcinoma of no special type, grade II (Tubule "
     "formation: 3, Nuclear grade: 2, Mitoses: 1)",
     "Breast, core-needle biopsy; Invasive carcinoma of no special type, grade II (Tubule "
     "formation: 3, Nuclear grade: 2, Mitoses: 1)"},
    {"Breast, sono-guided core biopsy;  1. Invasive carcinoma of no special type, grade I "
     "(Tubule formation: 2, Nuclear grade: 2, Mitoses: 1)  2. Ductal carcinoma in situ  3. "
     "Microcalcification",
     "Breast, sono-guided core biopsy; 1. Invasive carcinoma of no special type, grade II "
     "(Tubule formation: 3, Nuclear grade: 2, Mitoses: 1) 2. Ductal carcinoma in situ 3. "
     "Microcalcification"},
    {"Urinary bladder, transurethral resection;  Invasive urothelial carcinoma,  with "
     "involvement of subepithelial connective tissue  Note) The specimen includes muscle "
     "proper.",
     "Urinary bladder, transurethral resection; Invasive urothelial carcinoma, with "
     "involvement of subepithelial connective tissue 2. Chronic granulomatous inflammation "
     "with foreign body reaction Note) The specimen includes muscle."},
    {"Prostate, biopsy; Acinar adenocarcinoma, Gleason's score 6 (3+3), grade group 1, tumor "
     "volume: 10%",
     "Prostate, biopsy; Acinar adenocarcinoma, Gleason's score 7 (3+4), grade group 2 "
     "(Gleason pattern 4: 50%), tumor volume: 5%"},
    {"Lung, biopsy;  Adenocarcinoma", "Lung, biopsy; Metastatic adenocarcinoma, from colon "
                                      "primary"},
}};

inline constexpr int kBladderPairIndex = 2;

}  // namespace fixtures
