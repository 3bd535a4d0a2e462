#include "temppnet/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "temppnet/gait.hpp"

namespace temppnet {

using nlohmann::json;

PrototypeSource locate_prototype_source(TempPNet& model,
                                        const std::vector<TempPNet::Prepared>& corpus,
                                        int symptom_m) {
  if (corpus.empty()) throw DataError("locate_prototype_source: empty corpus");
  const int m = model.hyperparams().num_symptoms;
  if (symptom_m < 0 || symptom_m >= m)
    throw DataError("locate_prototype_source: symptom index out of range");

  PrototypeSource best;
  for (int u = 0; u < static_cast<int>(corpus.size()); ++u) {
    TempPNet::Evidence ev = model.predict(corpus[u]);
    for (int i = 0; i < static_cast<int>(ev.severities.size()); ++i) {
      const double sev = ev.severities[i][symptom_m];
      if (sev > best.severity) {
        best.severity = sev;
        best.patient_index = u;
        best.test_index = i;
        // patch argmax within the winning test, ties to the lowest patch
        const std::vector<double>& ps = ev.patch_scores[i];
        const int n_o = Encoder::kNumPatches;
        int o_star = 0;
        for (int o = 1; o < n_o; ++o)
          if (ps[symptom_m * n_o + o] > ps[symptom_m * n_o + o_star]) o_star = o;
        best.patch_index = o_star;
        best.patch_score = ps[symptom_m * n_o + o_star];
      }
    }
  }
  return best;
}

ImportanceResult importance_scores(TempPNet& model, const TempPNet::Prepared& patient,
                                   int test_index, int patch_index) {
  if (test_index < 0 || test_index >= static_cast<int>(patient.segs.size()))
    throw DataError("importance_scores: test index out of range");
  if (patch_index < 0 || patch_index >= Encoder::kNumPatches)
    throw DataError("importance_scores: patch index out of range");
  const int segment = patch_index / Encoder::kPatchesPerSegment;
  const int local_patch = patch_index % Encoder::kPatchesPerSegment;

  ad::Param x("interpret.input", {3, 300});
  x.value = patient.segs[test_index][segment];

  ad::Graph g;
  Encoder::Leaves lv = model.encoder().leaves(g);
  ad::Value h = model.encoder().encode_segment(g, lv, g.param(x), /*training=*/false);
  ad::Value column = g.col(h, local_patch);  // [128]

  ImportanceResult out;
  out.segment = segment;
  std::vector<double> sq(300, 0.0);
  for (int c = 0; c < Encoder::kEmbedDim; ++c) {
    g.clear_grads();
    x.zero_grad();
    g.backward(g.at(column, c));
    for (int axis = 0; axis < 3; ++axis)
      for (int l = 0; l < 300; ++l) {
        const double d = x.grad[axis * 300 + l];
        sq[l] += d * d;
      }
  }
  out.scores.resize(300);
  for (int l = 0; l < 300; ++l) out.scores[l] = std::sqrt(sq[l]);

  out.field_begin = 0;
  out.field_end = -1;
  for (int l = 0; l < 300; ++l)
    if (out.scores[l] > 1e-8) {
      if (out.field_end < 0) out.field_begin = l;
      out.field_end = l;
    }
  return out;
}

namespace {

struct GaitSummary {
  double stride_interval_s = 0;     // mean peak spacing on the x axis
  double walking_speed_proxy = 0;   // steps per second from the spacing
  bool valid = false;
};

GaitSummary summarize_segment(const SegmentSamples& seg, double rate_hz) {
  GaitSummary s;
  if (seg.size() < 3) return s;
  std::vector<double> x;
  x.reserve(seg.size());
  for (const Vec3& v : seg) x.push_back(v[0]);
  auto peaks = detect_peaks(x);
  if (peaks.size() < 2) return s;
  double mean_dt = 0;
  for (std::size_t i = 0; i + 1 < peaks.size(); ++i)
    mean_dt += static_cast<double>(peaks[i + 1] - peaks[i]);
  mean_dt /= static_cast<double>(peaks.size() - 1);
  s.stride_interval_s = mean_dt / rate_hz;
  s.walking_speed_proxy = s.stride_interval_s > 0 ? 1.0 / s.stride_interval_s : 0.0;
  s.valid = true;
  return s;
}

// group means of the summary over the non-depressed patients' walking
// segments; the published footnote computes "usual" values the same way
GaitSummary usual_case(const Corpus& corpus, int rate_hz) {
  GaitSummary acc;
  int n = 0;
  for (const PatientRecord& rec : corpus.patients) {
    if (rec.label != 0) continue;
    for (const WalkingTest& t : rec.tests) {
      const int rate = static_cast<int>(t.rate_hz);
      for (int segi : {WalkingTest::kOutbound, WalkingTest::kReturn}) {
        GaitSummary s = summarize_segment(resample(t.segments[segi], rate, rate_hz),
                                          rate_hz);
        if (!s.valid) continue;
        acc.stride_interval_s += s.stride_interval_s;
        acc.walking_speed_proxy += s.walking_speed_proxy;
        ++n;
      }
    }
  }
  if (n > 0) {
    acc.stride_interval_s /= n;
    acc.walking_speed_proxy /= n;
    acc.valid = true;
  }
  return acc;
}

std::string svg_header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) +
         " " + std::to_string(h) + "\">\n";
}

void write_trend_svg(const std::string& path,
                     const std::vector<std::vector<double>>& curve,
                     const std::vector<double>& times) {
  const int w = 760, h = 300, pad = 30;
  std::ofstream out(path, std::ios::trunc);
  out << svg_header(w, h);
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad
      << "\" y2=\"" << h - pad << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\""
      << h - pad << "\" stroke=\"black\"/>\n";
  const double t_max = times.back();
  const std::size_t m = curve.front().size();
  for (std::size_t sym = 0; sym < m; ++sym) {
    const int hue = static_cast<int>(360.0 * sym / m);
    out << "<polyline fill=\"none\" stroke=\"hsl(" << hue
        << ",70%,40%)\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double px = pad + (w - 2 * pad) * (times[i] / t_max);
      const double py = h - pad - (h - 2 * pad) * curve[i][sym];
      out << px << "," << py << " ";
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

void write_symptom_svg(const std::string& path, const std::vector<double>& seg,
                       const std::vector<double>& importance) {
  const int w = 760, h = 300, pad = 30;
  double vmax = 1e-9, imax = 1e-12;
  for (double v : seg) vmax = std::max(vmax, std::abs(v));
  for (double v : importance) imax = std::max(imax, v);
  std::ofstream out(path, std::ios::trunc);
  out << svg_header(w, h);
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  const double col_w = static_cast<double>(w - 2 * pad) / 300.0;
  for (int l = 0; l < 300; ++l) {
    const double a = importance[l] / imax;
    if (a <= 0) continue;
    out << "<rect x=\"" << pad + l * col_w << "\" y=\"" << pad << "\" width=\""
        << col_w << "\" height=\"" << h - 2 * pad << "\" fill=\"gold\" fill-opacity=\""
        << 0.65 * a << "\"/>\n";
  }
  static const char* colors[3] = {"crimson", "seagreen", "steelblue"};
  for (int axis = 0; axis < 3; ++axis) {
    out << "<polyline fill=\"none\" stroke=\"" << colors[axis]
        << "\" stroke-width=\"1\" points=\"";
    for (int l = 0; l < 300; ++l) {
      const double v = seg[axis * 300 + l];
      const double px = pad + l * col_w;
      const double py = h / 2.0 - (h / 2.0 - pad) * (v / vmax);
      out << px << "," << py << " ";
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace

ReportFiles render_report(TempPNet& model, const Corpus& corpus, int patient_index,
                          const std::string& out_dir, const ReportOptions& opt) {
  if (patient_index < 0 ||
      patient_index >= static_cast<int>(corpus.patients.size()))
    throw DataError("render_report: patient index out of range");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw DataError("render_report: cannot create output directory " + out_dir);

  const HyperParams& hp = model.hyperparams();
  std::vector<TempPNet::Prepared> prepared;
  for (const PatientRecord& r : corpus.patients) prepared.push_back(model.prepare(r));
  TempPNet::Evidence ev = model.predict(prepared[patient_index]);
  if (ev.trend_strengths.empty())
    throw DataError("render_report: the model variant has no trend prototypes");

  // trends ranked by strength, ties toward the lower index
  std::vector<int> rank(ev.trend_strengths.size());
  for (std::size_t k = 0; k < rank.size(); ++k) rank[k] = static_cast<int>(k);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
    return ev.trend_strengths[a] > ev.trend_strengths[b];
  });
  const int top_k = rank.front();

  // top symptom: strongest severity anywhere in this patient's tests
  int top_m = 0;
  double top_m_score = -1;
  for (int m = 0; m < hp.num_symptoms; ++m) {
    double sc = 0;
    for (const auto& col : ev.severities) sc = std::max(sc, col[m]);
    if (sc > top_m_score) {
      top_m_score = sc;
      top_m = m;
    }
  }

  PrototypeSource source = locate_prototype_source(model, prepared, top_m);
  ImportanceResult imp = importance_scores(model, prepared[source.patient_index],
                                           source.test_index, source.patch_index);

  // trend curve over [0, horizon + window]
  const double span = hp.horizon_days + hp.window_days;
  const int steps = static_cast<int>(std::lround(span * opt.samples_per_day));
  std::vector<double> curve_times;
  std::vector<std::vector<double>> curve;
  for (int i = 0; i <= steps; ++i) {
    const double t = span * i / steps;
    curve_times.push_back(t);
    ad::Graph g;
    ad::Value v = g.sigmoid(
        trend_logit(g, model.trends().coeff[top_k], model.trend_time(), g.scalar_const(t)));
    curve.push_back(v.data());
  }

  const std::string base = out_dir + "/";
  ReportFiles files;
  files.trend_csv = base + "trend_" + std::to_string(top_k) + ".csv";
  files.trend_svg = base + "trend_" + std::to_string(top_k) + ".svg";
  files.symptom_csv = base + "symptom_" + std::to_string(top_m) + ".csv";
  files.symptom_svg = base + "symptom_" + std::to_string(top_m) + ".svg";
  files.report_json = base + "report.json";

  {
    std::ofstream csv(files.trend_csv, std::ios::trunc);
    csv << "t_days";
    for (int m = 0; m < hp.num_symptoms; ++m) csv << ",severity_" << m;
    csv << "\n";
    csv.precision(10);
    for (std::size_t i = 0; i < curve_times.size(); ++i) {
      csv << curve_times[i];
      for (double v : curve[i]) csv << "," << v;
      csv << "\n";
    }
    if (!csv) throw DataError("render_report: cannot write " + files.trend_csv);
  }
  write_trend_svg(files.trend_svg, curve, curve_times);

  const std::vector<double>& seg =
      prepared[source.patient_index].segs[source.test_index][imp.segment];
  {
    std::ofstream csv(files.symptom_csv, std::ios::trunc);
    csv << "sample_index,x,y,z,importance\n";
    csv.precision(10);
    for (int l = 0; l < 300; ++l)
      csv << l << "," << seg[l] << "," << seg[300 + l] << "," << seg[600 + l] << ","
          << imp.scores[l] << "\n";
  }
  write_symptom_svg(files.symptom_svg, seg, imp.scores);

  // peak-based gait statistics for the source segment vs the
  // non-depressed group means (documented proxies, not device-calibrated)
  const PatientRecord& source_rec = corpus.patients[source.patient_index];
  const WalkingTest& source_test = source_rec.tests[source.test_index];
  GaitSummary seg_summary = summarize_segment(
      resample(source_test.segments[imp.segment],
               static_cast<int>(source_test.rate_hz), hp.rate_hz),
      hp.rate_hz);
  GaitSummary usual = usual_case(corpus, hp.rate_hz);

  json report;
  report["patient_id"] = corpus.patients[patient_index].patient_id;
  report["label"] = corpus.patients[patient_index].label;
  report["probability"] = ev.probability;
  report["predicted_depressed"] = ev.probability > 0.5;
  json trends = json::array();
  for (int k : rank)
    trends.push_back({{"k", k},
                      {"class", model.trends().is_depression(k) ? "depression"
                                                                : "non_depression"},
                      {"strength", ev.trend_strengths[k]},
                      {"start_time_days", ev.start_times[k]}});
  report["trends"] = trends;
  report["top_trend"] = {{"k", top_k},
                         {"class", model.trends().is_depression(top_k)
                                       ? "depression"
                                       : "non_depression"},
                         {"csv", "trend_" + std::to_string(top_k) + ".csv"},
                         {"svg", "trend_" + std::to_string(top_k) + ".svg"}};

  json series = json::array();
  for (std::size_t i = 0; i < ev.severities.size(); ++i)
    series.push_back({{"t_days", prepared[patient_index].times[i]},
                      {"severity", ev.severities[i][top_m]}});
  report["top_symptom"] = {
      {"m", top_m},
      {"patient_severity_series", series},
      {"source",
       {{"patient_id", source_rec.patient_id},
        {"test_index", source.test_index},
        {"patch_index", source.patch_index},
        {"segment", imp.segment},
        {"severity", source.severity},
        {"patch_score", source.patch_score},
        {"field_begin", imp.field_begin},
        {"field_end", imp.field_end}}},
      {"csv", "symptom_" + std::to_string(top_m) + ".csv"},
      {"svg", "symptom_" + std::to_string(top_m) + ".svg"}};
  report["gait_summary"] = {
      {"stride_interval_s", seg_summary.valid ? seg_summary.stride_interval_s : 0.0},
      {"walking_speed_proxy_hz",
       seg_summary.valid ? seg_summary.walking_speed_proxy : 0.0},
      {"usual_stride_interval_s", usual.valid ? usual.stride_interval_s : 0.0},
      {"usual_walking_speed_proxy_hz", usual.valid ? usual.walking_speed_proxy : 0.0},
      {"note", "stride statistics are peak-detection proxies; the usual case is "
               "the mean over non-depressed patients"}};

  std::ofstream out(files.report_json, std::ios::trunc);
  out << report.dump(2) << "\n";
  if (!out) throw DataError("render_report: cannot write " + files.report_json);
  return files;
}

}  // namespace temppnet
