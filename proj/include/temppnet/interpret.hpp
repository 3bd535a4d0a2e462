#pragma once

#include <string>
#include <vector>

#include "temppnet/model.hpp"
#include "temppnet/sensor.hpp"

// Prototype visualization and per-patient interpretation reports: the
// corpus-wide argmax search for each symptom prototype's source segment,
// gradient-based receptive-field importance scores, and file rendering.

namespace temppnet {

struct PrototypeSource {
  int patient_index = -1;  // u*
  int test_index = -1;     // i*
  int patch_index = -1;    // o*, 0-based over the 15 patches
  double severity = 0;     // s_{m,i*}
  double patch_score = 0;  // s_{o*|m,i*}
};

// Exhaustive argmax of symptom prototype m over patients, tests and then
// patches; ties resolve toward the lowest indices.
PrototypeSource locate_prototype_source(TempPNet& model,
                                        const std::vector<TempPNet::Prepared>& corpus,
                                        int symptom_m);

struct ImportanceResult {
  int segment = 0;                   // which of the three segments o* lives in
  std::vector<double> scores;        // 300 per-column Jacobian Frobenius norms
  int field_begin = 0;               // contiguous region with scores > 1e-8
  int field_end = -1;
};

// One reverse pass per patch coordinate accumulates the squared input
// gradients; eval-mode encoder.
ImportanceResult importance_scores(TempPNet& model, const TempPNet::Prepared& patient,
                                   int test_index, int patch_index);

struct ReportOptions {
  double samples_per_day = 4.0;  // trend curve sampling density
};

struct ReportFiles {
  std::string report_json;
  std::string trend_csv;
  std::string trend_svg;
  std::string symptom_csv;
  std::string symptom_svg;
};

// Writes report.json, the top trend's curve as CSV+SVG over
// t in [0, horizon + window], and the top symptom's source segment with an
// importance-shaded band, plus peak-based gait summary statistics against
// the non-depressed group means.
ReportFiles render_report(TempPNet& model, const Corpus& corpus, int patient_index,
                          const std::string& out_dir, const ReportOptions& opt = {});

}  // namespace temppnet
