#include "temppnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace temppnet {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// quantization keeps the JSONL compact and is part of the generator
double quantize(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

double SeverityTrajectory::value(double t_days, double window_days) const {
  const double f = window_days > 0 ? t_days / window_days : 0.0;
  double v = start + (end - start) * f;
  switch (kind) {
    case TrajectoryKind::kRise:
    case TrajectoryKind::kFall:
      break;
    case TrajectoryKind::kRiseWithDips: {
      const double d = (t_days - dip_center_days) / dip_width_days;
      v -= dip_depth * std::exp(-d * d);
      break;
    }
    case TrajectoryKind::kFlatFluctuate:
      v = start + fluct_amp * std::sin(2.0 * M_PI * t_days / fluct_period_days +
                                       fluct_phase);
      break;
  }
  return clamp01(v);
}

SeverityTrajectory sample_trajectory(int label, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SeverityTrajectory t;
  if (label == 1) {
    t.kind = u(rng) < 0.5 ? TrajectoryKind::kRise : TrajectoryKind::kRiseWithDips;
    t.start = 0.05 + 0.10 * u(rng);
    t.end = 0.80 + 0.15 * u(rng);
    if (t.kind == TrajectoryKind::kRiseWithDips) {
      t.dip_depth = 0.10 + 0.15 * u(rng);
      t.dip_center_days = 5.0 + 4.0 * u(rng);
      t.dip_width_days = 1.0 + 1.0 * u(rng);
    }
  } else {
    t.kind = u(rng) < 0.5 ? TrajectoryKind::kFall : TrajectoryKind::kFlatFluctuate;
    if (t.kind == TrajectoryKind::kFall) {
      t.start = 0.55 + 0.25 * u(rng);
      t.end = 0.02 + 0.10 * u(rng);
    } else {
      t.start = 0.05 + 0.15 * u(rng);
      t.fluct_amp = 0.05 * u(rng);
      t.fluct_period_days = 3.0 + 5.0 * u(rng);
      t.fluct_phase = 2.0 * M_PI * u(rng);
    }
  }
  t.noise = 0.02;
  return t;
}

GaitProfile sample_profile(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GaitProfile p;
  p.step_freq_hz = 1.7 + 0.3 * u(rng);
  p.stride_amp = 0.25 + 0.10 * u(rng);
  p.bounce_amp = 0.08 + 0.04 * u(rng);
  p.noise_scale = 0.02 + 0.02 * u(rng);
  return p;
}

WalkingTest synthesize_test(double t_days, double severity, const GaitProfile& profile,
                            const GenOptions& opt, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

  const double f = profile.frequency_at(severity);
  const double amp = profile.amplitude_at(severity);
  const double bounce = profile.bounce_amp * (1.0 - profile.amp_coupling * severity);
  const double rate = static_cast<double>(opt.rate_hz);

  WalkingTest test;
  test.test_time_days = t_days;
  test.rate_hz = rate;

  for (int seg : {WalkingTest::kOutbound, WalkingTest::kReturn}) {
    const int len =
        static_cast<int>(std::lround(opt.steps_per_walk / f * rate));
    const double px = phase(rng), py = phase(rng), pz = phase(rng);
    SegmentSamples samples;
    samples.reserve(len);
    for (int l = 0; l < len; ++l) {
      const double tau = l / rate;
      const double x = amp * std::sin(2.0 * M_PI * f * tau + px) +
                       0.25 * amp * std::sin(4.0 * M_PI * f * tau + 2 * px) +
                       profile.noise_scale * gauss(rng);
      const double y = 0.3 * amp * std::sin(2.0 * M_PI * f * tau + py) +
                       profile.noise_scale * gauss(rng);
      const double z = 1.0 + bounce * std::sin(4.0 * M_PI * f * tau + pz) +
                       profile.noise_scale * gauss(rng);
      samples.push_back({quantize(x), quantize(y), quantize(z)});
    }
    test.segments[seg] = std::move(samples);
  }

  const int rest_len = static_cast<int>(std::lround(opt.rest_seconds * rate));
  SegmentSamples rest;
  rest.reserve(rest_len);
  for (int l = 0; l < rest_len; ++l)
    rest.push_back({quantize(0.3 * profile.noise_scale * gauss(rng)),
                    quantize(0.3 * profile.noise_scale * gauss(rng)),
                    quantize(1.0 + 0.3 * profile.noise_scale * gauss(rng))});
  test.segments[WalkingTest::kRest] = std::move(rest);
  return test;
}

PatientRecord generate_patient(const std::string& id, int label,
                               const GaitProfile& profile,
                               const SeverityTrajectory& traj, const GenOptions& opt,
                               std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_tests_dist(opt.min_tests, opt.max_tests);
  std::uniform_real_distribution<double> time_dist(0.0, opt.window_days);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int n = n_tests_dist(rng);
  std::vector<double> times;
  for (;;) {
    times.clear();
    for (int i = 0; i < n; ++i) times.push_back(time_dist(rng));
    std::sort(times.begin(), times.end());
    const double base = times.front();
    for (double& t : times) t -= base;
    bool distinct = true;
    for (int i = 1; i < n; ++i)
      if (times[i] - times[i - 1] < 1e-6) distinct = false;
    if (distinct) break;
  }

  PatientRecord rec;
  rec.patient_id = id;
  rec.label = label;
  for (double t : times) {
    const double sev = clamp01(traj.value(t, opt.window_days) + traj.noise * gauss(rng));
    rec.tests.push_back(synthesize_test(t, sev, profile, opt, rng));
  }
  return rec;
}

Corpus generate_records(const GenOptions& opt) {
  if (opt.n_patients < 2) throw DataError("generate: need at least 2 patients");
  const int n_dep = static_cast<int>(std::lround(opt.n_patients * opt.balance));
  if (n_dep <= 0 || n_dep >= opt.n_patients)
    throw DataError("generate: balance must leave both classes non-empty");

  Corpus corpus;
  for (int i = 0; i < opt.n_patients; ++i) {
    const int label = i < n_dep ? 1 : 0;
    char id[16];
    std::snprintf(id, sizeof(id), "P%04d", i);
    std::mt19937_64 rng(mix_seed(opt.seed, static_cast<std::uint64_t>(i)));
    const GaitProfile profile = sample_profile(rng);
    const SeverityTrajectory traj = sample_trajectory(label, rng);
    corpus.patients.push_back(generate_patient(id, label, profile, traj, opt, rng));
  }
  return corpus;
}

void generate_corpus(const GenOptions& opt, const std::string& out_path) {
  using nlohmann::json;
  Corpus corpus = generate_records(opt);

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw DataError("generate_corpus: cannot write " + out_path);
  for (const PatientRecord& rec : corpus.patients) {
    for (const WalkingTest& t : rec.tests) {
      json line;
      line["patient_id"] = rec.patient_id;
      line["label"] = rec.label;
      line["t_days"] = t.test_time_days;
      line["rate_hz"] = opt.rate_hz;
      static const char* keys[3] = {"outbound", "return", "rest"};
      for (int s = 0; s < 3; ++s) {
        json seg = json::array();
        for (const Vec3& v : t.segments[s]) seg.push_back({v[0], v[1], v[2]});
        line[keys[s]] = std::move(seg);
      }
      out << line.dump() << "\n";
    }
  }
  if (!out) throw DataError("generate_corpus: write failed for " + out_path);

  json manifest;
  manifest["n_patients"] = opt.n_patients;
  manifest["balance"] = opt.balance;
  manifest["seed"] = opt.seed;
  manifest["rate_hz"] = opt.rate_hz;
  manifest["window_days"] = opt.window_days;
  manifest["min_tests"] = opt.min_tests;
  manifest["max_tests"] = opt.max_tests;
  manifest["steps_per_walk"] = opt.steps_per_walk;
  manifest["rest_seconds"] = opt.rest_seconds;
  std::ofstream mf(out_path + ".manifest.json", std::ios::trunc);
  mf << manifest.dump(2) << "\n";
}

}  // namespace temppnet
