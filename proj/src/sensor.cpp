#include "temppnet/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

namespace temppnet {

namespace {

double quat_norm(const Quat& q) {
  return std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
}

}  // namespace

Mat3 quaternion_to_rotation(const Quat& q_in) {
  const double n = quat_norm(q_in);
  if (n < 1e-12) throw DataError("quaternion_to_rotation: zero quaternion");
  const double x = q_in[0] / n, y = q_in[1] / n, z = q_in[2] / n, w = q_in[3] / n;
  return Mat3{w * w + x * x - y * y - z * z, 2 * x * y - 2 * w * z, 2 * x * z + 2 * w * y,
              2 * x * y + 2 * w * z, w * w - x * x + y * y - z * z, 2 * y * z - 2 * w * x,
              2 * x * z - 2 * w * y, 2 * y * z + 2 * w * x, w * w - x * x - y * y + z * z};
}

Vec3 rotate(const Mat3& r, const Vec3& v) {
  return Vec3{r[0] * v[0] + r[1] * v[1] + r[2] * v[2],
              r[3] * v[0] + r[4] * v[1] + r[5] * v[2],
              r[6] * v[0] + r[7] * v[1] + r[8] * v[2]};
}

GlobalFrameResult to_global_frame(const SegmentSamples& local,
                                  const std::vector<Quat>& quats) {
  GlobalFrameResult out;
  out.samples.reserve(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) {
    if (i >= quats.size()) {
      ++out.dropped;
      continue;
    }
    const double n = quat_norm(quats[i]);
    if (std::abs(n - 1.0) > 1e-3) {
      ++out.dropped;
      continue;
    }
    out.samples.push_back(rotate(quaternion_to_rotation(quats[i]), local[i]));
  }
  return out;
}

SegmentSamples resample(const SegmentSamples& seg, int from_hz, int to_hz) {
  if (from_hz <= 0 || to_hz <= 0 || from_hz % to_hz != 0)
    throw DataError("resample: from_hz " + std::to_string(from_hz) +
                    " not divisible by to_hz " + std::to_string(to_hz));
  const int factor = from_hz / to_hz;
  if (factor == 1) return seg;
  SegmentSamples out;
  out.reserve((seg.size() + factor - 1) / factor);
  for (std::size_t start = 0; start < seg.size(); start += factor) {
    const std::size_t end = std::min(seg.size(), start + factor);
    Vec3 acc{0, 0, 0};
    for (std::size_t i = start; i < end; ++i)
      for (int a = 0; a < 3; ++a) acc[a] += seg[i][a];
    const double cnt = static_cast<double>(end - start);
    for (int a = 0; a < 3; ++a) acc[a] /= cnt;
    out.push_back(acc);
  }
  return out;
}

std::vector<double> shape_segment(const SegmentSamples& seg) {
  std::vector<double> m(static_cast<std::size_t>(kSegmentChannels) * kSegmentLength, 0.0);
  const int n = std::min<int>(kSegmentLength, static_cast<int>(seg.size()));
  for (int j = 0; j < n; ++j)
    for (int a = 0; a < 3; ++a)
      m[static_cast<std::size_t>(a) * kSegmentLength + j] = seg[j][a];
  return m;
}

Quat quaternion_from_axis_angle(const Vec3& axis, double theta) {
  const double s = std::sin(theta / 2.0);
  return Quat{axis[0] * s, axis[1] * s, axis[2] * s, std::cos(theta / 2.0)};
}

Quat sample_random_quaternion(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double x, y, z, norm;
  do {
    x = uni(rng);
    y = uni(rng);
    z = uni(rng);
    norm = std::sqrt(x * x + y * y + z * z);
  } while (norm < 1e-12);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  const double theta = ang(rng);
  return quaternion_from_axis_angle(Vec3{x / norm, y / norm, z / norm}, theta);
}

WalkingTest apply_rotation(const WalkingTest& test, const Mat3& r) {
  WalkingTest out = test;
  for (SegmentSamples& seg : out.segments)
    for (Vec3& v : seg) v = rotate(r, v);
  return out;
}

WalkingTest augment_rotation(const WalkingTest& test, std::mt19937_64& rng) {
  return apply_rotation(test, quaternion_to_rotation(sample_random_quaternion(rng)));
}

void rotate_shaped(std::vector<double>& shaped, const Mat3& r) {
  for (int j = 0; j < kSegmentLength; ++j) {
    const Vec3 v{shaped[j], shaped[kSegmentLength + j], shaped[2 * kSegmentLength + j]};
    const Vec3 g = rotate(r, v);
    shaped[j] = g[0];
    shaped[kSegmentLength + j] = g[1];
    shaped[2 * kSegmentLength + j] = g[2];
  }
}

int label_from_survey(int score) {
  if (score < 0 || score > 24)
    throw DataError("label_from_survey: score " + std::to_string(score) +
                    " outside [0,24]");
  return score > 3 ? 1 : 0;
}

namespace {

using nlohmann::json;

SegmentSamples parse_samples(const json& arr, const char* key, int line_no) {
  if (!arr.is_array())
    throw DataError("corpus line " + std::to_string(line_no) + ": '" + key +
                    "' must be an array");
  SegmentSamples out;
  out.reserve(arr.size());
  for (const json& s : arr) {
    if (!s.is_array() || s.size() != 3)
      throw DataError("corpus line " + std::to_string(line_no) + ": sample in '" +
                      key + "' must be [x,y,z]");
    Vec3 v{s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    for (double c : v)
      if (!std::isfinite(c))
        throw DataError("corpus line " + std::to_string(line_no) +
                        ": non-finite sample in '" + key + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<Quat> parse_quats(const json& arr, int line_no) {
  std::vector<Quat> out;
  out.reserve(arr.size());
  for (const json& s : arr) {
    if (!s.is_array() || s.size() != 4)
      throw DataError("corpus line " + std::to_string(line_no) +
                      ": quaternion must be [x,y,z,w]");
    out.push_back(Quat{s[0].get<double>(), s[1].get<double>(), s[2].get<double>(),
                       s[3].get<double>()});
  }
  return out;
}

}  // namespace

Corpus load_corpus(const std::string& path, const CorpusLoadOptions& opt) {
  std::ifstream in(path);
  if (!in) throw DataError("load_corpus: cannot open " + path);

  static const char* kSegKeys[3] = {"outbound", "return", "rest"};
  Corpus corpus;
  std::map<std::string, std::size_t> index;  // patient_id -> position
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("patient_id") || !j.contains("label") || !j.contains("t_days") ||
        !j.contains("rate_hz"))
      throw DataError("corpus line " + std::to_string(line_no) +
                      ": missing patient_id/label/t_days/rate_hz");
    const std::string pid = j["patient_id"].get<std::string>();
    const int label = j["label"].get<int>();
    if (label != 0 && label != 1)
      throw DataError("corpus line " + std::to_string(line_no) + ": label must be 0 or 1");

    WalkingTest test;
    test.test_time_days = j["t_days"].get<double>();
    test.rate_hz = j["rate_hz"].get<double>();
    if (!(test.rate_hz > 0))
      throw DataError("corpus line " + std::to_string(line_no) + ": rate_hz must be > 0");
    for (int s = 0; s < 3; ++s) {
      if (!j.contains(kSegKeys[s]))
        throw DataError("corpus line " + std::to_string(line_no) + ": missing segment '" +
                        kSegKeys[s] + "'");
      SegmentSamples samples = parse_samples(j[kSegKeys[s]], kSegKeys[s], line_no);
      if (j.contains("quaternions") && j["quaternions"].contains(kSegKeys[s])) {
        GlobalFrameResult r =
            to_global_frame(samples, parse_quats(j["quaternions"][kSegKeys[s]], line_no));
        corpus.dropped_samples += r.dropped;
        test.segments[s] = std::move(r.samples);
      } else {
        test.segments[s] = std::move(samples);
      }
    }

    auto it = index.find(pid);
    if (it == index.end()) {
      index.emplace(pid, corpus.patients.size());
      corpus.patients.push_back(PatientRecord{pid, {std::move(test)}, label});
    } else {
      PatientRecord& rec = corpus.patients[it->second];
      if (rec.label != label)
        throw DataError("corpus: conflicting labels for patient '" + pid + "'");
      rec.tests.push_back(std::move(test));
    }
  }

  for (PatientRecord& rec : corpus.patients) {
    std::stable_sort(rec.tests.begin(), rec.tests.end(),
                     [](const WalkingTest& a, const WalkingTest& b) {
                       return a.test_time_days < b.test_time_days;
                     });
    const double base = rec.tests.front().test_time_days;
    for (std::size_t i = 0; i < rec.tests.size(); ++i) {
      WalkingTest& t = rec.tests[i];
      t.test_time_days -= base;
      if (i > 0 && t.test_time_days <= rec.tests[i - 1].test_time_days)
        throw DataError("corpus: duplicate test time for patient '" + rec.patient_id +
                        "'");
      if (t.test_time_days > opt.window_days)
        throw DataError("corpus: test outside the " + std::to_string(opt.window_days) +
                        "-day observation window for patient '" + rec.patient_id + "'");
    }
  }
  return corpus;
}

}  // namespace temppnet
