#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "temppnet/interpret.hpp"
#include "temppnet/synth.hpp"

using namespace temppnet;

namespace {

HyperParams tiny_hp() {
  HyperParams hp;
  hp.num_symptoms = 3;
  hp.time_dim = 8;
  hp.k_per_class = 1;
  return hp;
}

int count_lines(const std::string& path) {
  std::ifstream in(path);
  int n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("locate: a single-test corpus wins trivially and matches brute force") {
  GenOptions opt;
  opt.n_patients = 2;
  opt.seed = 3;
  opt.min_tests = 1;
  opt.max_tests = 1;
  Corpus corpus = generate_records(opt);
  TempPNet model(tiny_hp());
  model.init(5);
  std::vector<TempPNet::Prepared> prepared;
  for (const auto& r : corpus.patients) prepared.push_back(model.prepare(r));

  for (int m = 0; m < 3; ++m) {
    PrototypeSource src = locate_prototype_source(model, prepared, m);
    // brute force over all (u, i, o)
    int bu = -1, bi = -1, bo = -1;
    double best_sev = -1, best_patch = -1;
    for (int u = 0; u < 2; ++u) {
      auto ev = model.predict(prepared[u]);
      for (int i = 0; i < static_cast<int>(ev.severities.size()); ++i) {
        if (ev.severities[i][m] > best_sev) {
          best_sev = ev.severities[i][m];
          bu = u;
          bi = i;
          bo = 0;
          best_patch = -1;
          for (int o = 0; o < Encoder::kNumPatches; ++o) {
            const double ps = ev.patch_scores[i][m * Encoder::kNumPatches + o];
            if (ps > best_patch) {
              best_patch = ps;
              bo = o;
            }
          }
        }
      }
    }
    CHECK(src.patient_index == bu);
    CHECK(src.test_index == bi);
    CHECK(src.patch_index == bo);
    CHECK(src.severity == doctest::Approx(best_sev).epsilon(1e-15));
    // max consistency: the severity is the winning patch's score
    CHECK(src.severity == doctest::Approx(src.patch_score).epsilon(1e-15));
  }
}

TEST_CASE("importance scores vanish outside the receptive field and pass FD checks") {
  GenOptions opt;
  opt.n_patients = 2;
  opt.seed = 7;
  opt.min_tests = 1;
  opt.max_tests = 1;
  Corpus corpus = generate_records(opt);
  TempPNet model(tiny_hp());
  model.init(9);
  TempPNet::Prepared prepared = model.prepare(corpus.patients[0]);

  const int patch = 7;  // return segment, local patch 2
  ImportanceResult imp = importance_scores(model, prepared, 0, patch);
  CHECK(imp.segment == 1);
  ReceptiveField rf = Encoder::receptive_field(patch + 1);
  for (int l = 0; l < 300; ++l) {
    CHECK(imp.scores[l] >= 0.0);
    if (l < rf.begin || l > rf.end) CHECK(imp.scores[l] == 0.0);
  }
  CHECK(imp.field_begin >= rf.begin);
  CHECK(imp.field_end <= rf.end);
  CHECK(imp.field_end >= imp.field_begin);  // non-degenerate field

  // finite-difference oracle on a few columns: perturb one input column,
  // difference the patch embedding, and compare Frobenius norms
  const int local_patch = patch % Encoder::kPatchesPerSegment;
  auto encode_patch = [&](const std::vector<double>& seg) {
    ad::Graph g;
    auto lv = model.encoder().leaves(g);
    ad::Value h =
        model.encoder().encode_segment(g, lv, g.input({3, 300}, seg.data()), false);
    return g.col(h, local_patch).data();
  };
  auto fd_frobenius = [&](int l, double h) {
    double fro2 = 0;
    for (int axis = 0; axis < 3; ++axis) {
      auto pert = prepared.segs[0][imp.segment];
      pert[axis * 300 + l] += h;
      auto up = encode_patch(pert);
      pert[axis * 300 + l] -= 2 * h;
      auto dn = encode_patch(pert);
      for (int c = 0; c < Encoder::kEmbedDim; ++c) {
        const double d = (up[c] - dn[c]) / (2 * h);
        fro2 += d * d;
      }
    }
    return std::sqrt(fro2);
  };
  // FD is only meaningful away from exact pooling ties, so stay inside the
  // real (unpadded) signal region and gate on step-size self-consistency to
  // dodge relu/pool kinks.
  int signal_len = 0;
  const auto& seg_data = prepared.segs[0][imp.segment];
  for (int l = 0; l < 300; ++l)
    for (int axis = 0; axis < 3; ++axis)
      if (seg_data[axis * 300 + l] != 0.0) signal_len = l + 1;
  REQUIRE(signal_len > rf.begin + 40);
  int checked = 0;
  for (int off = 3; off < signal_len - rf.begin - 2 && checked < 4; off += 17) {
    const int l = rf.begin + off;
    const double fd1 = fd_frobenius(l, 1e-5);
    const double fd2 = fd_frobenius(l, 1e-6);
    if (oracles::rel_err(fd1, fd2, 1e-9) > 1e-4) continue;
    INFO("column " << l);
    CHECK(oracles::rel_err(imp.scores[l], fd1, 1e-9) < 1e-3);
    ++checked;
  }
  CHECK(checked >= 3);
}

TEST_CASE("with K=1 the top-ranked trend class follows the prediction sign") {
  GenOptions opt;
  opt.n_patients = 6;
  opt.seed = 11;
  opt.max_tests = 3;
  Corpus corpus = generate_records(opt);
  TempPNet model(tiny_hp());
  model.init(13);
  for (const auto& rec : corpus.patients) {
    auto ev = model.predict(model.prepare(rec));
    REQUIRE(ev.trend_strengths.size() == 2);
    const bool depression_first = ev.trend_strengths[0] > ev.trend_strengths[1];
    CHECK((ev.probability > 0.5) == depression_first);
  }
}

TEST_CASE("render_report writes consistent files") {
  GenOptions opt;
  opt.n_patients = 4;
  opt.seed = 17;
  opt.max_tests = 2;
  Corpus corpus = generate_records(opt);
  TempPNet model(tiny_hp());
  model.init(19);

  const std::string dir = "/tmp/tpn_report";
  std::filesystem::remove_all(dir);
  ReportFiles files = render_report(model, corpus, 0, dir);

  // probability in the JSON equals predict exactly
  std::ifstream in(files.report_json);
  REQUIRE(in.good());
  nlohmann::json report = nlohmann::json::parse(in);
  const double p = model.predict(model.prepare(corpus.patients[0])).probability;
  CHECK(report["probability"].get<double>() == p);

  // trend CSV covers [0, horizon + window] at 4 samples/day: 77 rows + header
  CHECK(count_lines(files.trend_csv) == 1 + 4 * 19 + 1);
  {
    std::ifstream csv(files.trend_csv);
    std::string header, first, line, last;
    std::getline(csv, header);
    CHECK(header.rfind("t_days,severity_0", 0) == 0);
    std::getline(csv, first);
    CHECK(first.rfind("0,", 0) == 0);
    while (std::getline(csv, line))
      if (!line.empty()) last = line;
    CHECK(last.rfind("19,", 0) == 0);
    // all severities strictly inside (0,1)
    std::ifstream csv2(files.trend_csv);
    std::getline(csv2, header);
    while (std::getline(csv2, line)) {
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');  // t
      while (std::getline(ss, cell, ',')) {
        const double v = std::stod(cell);
        CHECK(v > 0.0);
        CHECK(v < 1.0);
      }
    }
  }

  // symptom CSV: 300 rows, importance column non-negative
  CHECK(count_lines(files.symptom_csv) == 301);
  CHECK(std::filesystem::exists(files.trend_svg));
  CHECK(std::filesystem::exists(files.symptom_svg));

  // receptive field recorded in the report stays within the arithmetic bound
  const auto& src = report["top_symptom"]["source"];
  const int patch = src["patch_index"].get<int>();
  ReceptiveField rf = Encoder::receptive_field(patch + 1);
  CHECK(src["field_begin"].get<int>() >= rf.begin);
  CHECK(src["field_end"].get<int>() <= rf.end);

  CHECK(report["gait_summary"].contains("stride_interval_s"));
  CHECK(report["gait_summary"].contains("usual_walking_speed_proxy_hz"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("render_report rejects unusable paths and trendless variants") {
  GenOptions opt;
  opt.n_patients = 2;
  opt.seed = 23;
  opt.min_tests = 1;
  opt.max_tests = 1;
  Corpus corpus = generate_records(opt);
  TempPNet model(tiny_hp());
  model.init(29);
  CHECK_THROWS_AS(render_report(model, corpus, 5, "/tmp/tpn_report2"), DataError);
  CHECK_THROWS_AS(render_report(model, corpus, 0, "/proc/not_writable/x"), DataError);

  TempPNet sev_model(tiny_hp(), Ablation::kLastSeverity);
  sev_model.init(31);
  CHECK_THROWS_AS(render_report(sev_model, corpus, 0, "/tmp/tpn_report3"), DataError);
}
