#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "temppnet/sensor.hpp"

using namespace temppnet;

namespace {

Quat random_unit_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Quat q{n(rng), n(rng), n(rng), n(rng)};
  double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& c : q) c /= norm;
  return q;
}

double det3(const Mat3& r) {
  return r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
         r[2] * (r[3] * r[7] - r[4] * r[6]);
}

double norm3(const Vec3& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = std::string("/tmp/") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("identity quaternion gives the identity rotation") {
  Mat3 r = quaternion_to_rotation({0, 0, 0, 1});
  const Mat3 eye{1, 0, 0, 0, 1, 0, 0, 0, 1};
  for (int i = 0; i < 9; ++i) CHECK(r[i] == doctest::Approx(eye[i]).epsilon(1e-15));
}

TEST_CASE("90-degree z rotation maps x to y and fixes z") {
  const double h = std::sqrt(2.0) / 2.0;
  Mat3 r = quaternion_to_rotation({0, 0, h, h});
  Vec3 vx = rotate(r, {1, 0, 0});
  CHECK(std::abs(vx[0]) < 1e-12);
  CHECK(vx[1] == doctest::Approx(1).epsilon(1e-12));
  CHECK(std::abs(vx[2]) < 1e-12);
  Vec3 vz = rotate(r, {0, 0, 1});
  CHECK(std::abs(vz[0]) < 1e-12);
  CHECK(std::abs(vz[1]) < 1e-12);
  CHECK(vz[2] == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("rotation matrices are orthonormal with det +1") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    Mat3 r = quaternion_to_rotation(random_unit_quaternion(rng));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double dot = 0;
        for (int k = 0; k < 3; ++k) dot += r[i * 3 + k] * r[j * 3 + k];
        CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
      }
    CHECK(std::abs(det3(r) - 1.0) < 1e-12);
  }
}

TEST_CASE("zero quaternion is rejected") {
  CHECK_THROWS_AS(quaternion_to_rotation({0, 0, 0, 0}), DataError);
}

TEST_CASE("to_global_frame: identity quaternions leave samples unchanged") {
  SegmentSamples local = {{0.1, -0.2, 1.0}, {0.3, 0.0, 0.9}};
  std::vector<Quat> quats(2, Quat{0, 0, 0, 1});
  auto r = to_global_frame(local, quats);
  REQUIRE(r.samples.size() == 2);
  CHECK(r.dropped == 0);
  for (int i = 0; i < 2; ++i)
    for (int a = 0; a < 3; ++a) CHECK(r.samples[i][a] == doctest::Approx(local[i][a]));
}

TEST_CASE("to_global_frame: z-rotation fixes the z axis") {
  const double h = std::sqrt(2.0) / 2.0;
  SegmentSamples local = {{0, 0, 1}};
  auto r = to_global_frame(local, {Quat{0, 0, h, h}});
  REQUIRE(r.samples.size() == 1);
  CHECK(std::abs(r.samples[0][0]) < 1e-12);
  CHECK(std::abs(r.samples[0][1]) < 1e-12);
  CHECK(r.samples[0][2] == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("to_global_frame preserves per-sample norm") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  SegmentSamples local;
  std::vector<Quat> quats;
  for (int i = 0; i < 200; ++i) {
    local.push_back({n(rng), n(rng), n(rng)});
    quats.push_back(random_unit_quaternion(rng));
  }
  auto r = to_global_frame(local, quats);
  REQUIRE(r.samples.size() == local.size());
  for (std::size_t i = 0; i < local.size(); ++i)
    CHECK(std::abs(norm3(r.samples[i]) - norm3(local[i])) < 1e-9);
}

TEST_CASE("to_global_frame drops and counts samples without usable quaternions") {
  SegmentSamples local = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<Quat> quats = {Quat{0, 0, 0, 1}, Quat{0, 0, 0, 0.5}};  // short + off-unit
  auto r = to_global_frame(local, quats);
  CHECK(r.samples.size() == 1);
  CHECK(r.dropped == 2);
}

TEST_CASE("resample: constant signal stays constant at 1/10 length") {
  SegmentSamples seg(100, Vec3{0.5, -1.0, 2.0});
  auto out = resample(seg, 100, 10);
  REQUIRE(out.size() == 10);
  for (const Vec3& v : out) {
    CHECK(v[0] == doctest::Approx(0.5));
    CHECK(v[1] == doctest::Approx(-1.0));
    CHECK(v[2] == doctest::Approx(2.0));
  }
}

TEST_CASE("resample: alternating +1/-1 averages to zero") {
  SegmentSamples seg;
  for (int i = 0; i < 100; ++i) seg.push_back({i % 2 == 0 ? 1.0 : -1.0, 0, 0});
  auto out = resample(seg, 100, 10);
  REQUIRE(out.size() == 10);
  for (const Vec3& v : out) CHECK(std::abs(v[0]) < 1e-15);
}

TEST_CASE("resample: 105 samples give 11 outputs, last from a 5-sample block") {
  SegmentSamples seg(105, Vec3{0, 0, 0});
  for (int i = 100; i < 105; ++i) seg[i] = Vec3{2.0, 0, 0};
  auto out = resample(seg, 100, 10);
  REQUIRE(out.size() == 11);
  CHECK(out[10][0] == doctest::Approx(2.0));
}

TEST_CASE("resample: empty segment and bad rates") {
  CHECK(resample({}, 100, 10).empty());
  CHECK_THROWS_AS(resample({}, 100, 30), DataError);
}

TEST_CASE("shape_segment pads short and truncates long segments") {
  SegmentSamples seg296(296, Vec3{1, 2, 3});
  auto m = shape_segment(seg296);
  REQUIRE(m.size() == 900);
  for (int j = 296; j < 300; ++j)
    for (int a = 0; a < 3; ++a) CHECK(m[a * 300 + j] == 0.0);
  CHECK(m[295] == 1.0);
  CHECK(m[300 + 295] == 2.0);

  SegmentSamples seg300(300, Vec3{4, 5, 6});
  auto m300 = shape_segment(seg300);
  for (int j = 0; j < 300; ++j) CHECK(m300[j] == 4.0);

  SegmentSamples seg310(310, Vec3{7, 8, 9});
  seg310[299] = Vec3{-1, -1, -1};
  auto m310 = shape_segment(seg310);
  REQUIRE(m310.size() == 900);
  CHECK(m310[299] == -1.0);
}

TEST_CASE("resample then shape always yields 3x300") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(0, 4000);
  for (int t = 0; t < 20; ++t) {
    SegmentSamples seg(len(rng), Vec3{1, 1, 1});
    auto m = shape_segment(resample(seg, 100, 10));
    CHECK(m.size() == 900);
  }
}

TEST_CASE("sampled quaternions have unit norm") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    Quat q = sample_random_quaternion(rng);
    double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    CHECK(std::abs(n - 1.0) < 1e-12);
  }
}

TEST_CASE("axis-angle at theta 0 is the identity quaternion") {
  Quat q = quaternion_from_axis_angle({1, 0, 0}, 0.0);
  CHECK(q[0] == 0.0);
  CHECK(q[1] == 0.0);
  CHECK(q[2] == 0.0);
  CHECK(q[3] == 1.0);
}

// Independent Monte-Carlo oracle. Under the positive-octant axis sampler
// the mean of a rotated fixed vector is E[u u^T] v = (1/3, c, c) with
// c ~ 0.235 -- not zero. Library draws must agree with the oracle within
// Monte-Carlo noise, and with values frozen from a 2e6-draw oracle run.
TEST_CASE("rotated-vector mean matches the Monte-Carlo oracle of the sampler") {
  auto oracle_draw = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double x = uni(rng), y = uni(rng), z = uni(rng);
    double n = std::sqrt(x * x + y * y + z * z);
    x /= n;
    y /= n;
    z /= n;
    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
    double th = ang(rng), s = std::sin(th / 2), w = std::cos(th / 2);
    return Quat{x * s, y * s, z * s, w};
  };

  const Vec3 v{1, 0, 0};
  const int n = 100000;
  Vec3 lib_mean{0, 0, 0}, ora_mean{0, 0, 0};
  std::mt19937_64 rng_lib(123), rng_ora(456);
  for (int i = 0; i < n; ++i) {
    Vec3 a = rotate(quaternion_to_rotation(sample_random_quaternion(rng_lib)), v);
    Vec3 b = rotate(quaternion_to_rotation(oracle_draw(rng_ora)), v);
    for (int c = 0; c < 3; ++c) {
      lib_mean[c] += a[c] / n;
      ora_mean[c] += b[c] / n;
    }
  }
  for (int c = 0; c < 3; ++c) CHECK(std::abs(lib_mean[c] - ora_mean[c]) < 0.02);
  CHECK(lib_mean[0] == doctest::Approx(1.0 / 3.0).epsilon(0.05));
  CHECK(lib_mean[1] == doctest::Approx(0.235).epsilon(0.08));
  CHECK(lib_mean[2] == doctest::Approx(0.235).epsilon(0.08));
}

TEST_CASE("augmentation: identity rotation leaves the test unchanged") {
  WalkingTest t;
  t.segments[0] = {{1, 2, 3}};
  t.segments[1] = {{4, 5, 6}};
  t.segments[2] = {{0, 0, 1}};
  WalkingTest r = apply_rotation(t, Mat3{1, 0, 0, 0, 1, 0, 0, 0, 1});
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 3; ++a) CHECK(r.segments[s][0][a] == t.segments[s][0][a]);
}

TEST_CASE("augmentation preserves per-sample magnitudes") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0, 1);
  WalkingTest t;
  for (int s = 0; s < 3; ++s)
    for (int i = 0; i < 50; ++i) t.segments[s].push_back({n(rng), n(rng), n(rng)});
  WalkingTest r = augment_rotation(t, rng);
  for (int s = 0; s < 3; ++s)
    for (int i = 0; i < 50; ++i)
      CHECK(std::abs(norm3(r.segments[s][i]) - norm3(t.segments[s][i])) < 1e-9);
}

TEST_CASE("different augmentation draws differ") {
  WalkingTest t;
  t.segments[0] = {{1, 0, 0}};
  std::mt19937_64 rng1(1), rng2(2);
  WalkingTest a = augment_rotation(t, rng1);
  WalkingTest b = augment_rotation(t, rng2);
  bool same = true;
  for (int c = 0; c < 3; ++c) same = same && a.segments[0][0][c] == b.segments[0][0][c];
  CHECK_FALSE(same);
}

TEST_CASE("rotate_shaped matches rotating the samples before shaping") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0, 1);
  SegmentSamples seg;
  for (int i = 0; i < 120; ++i) seg.push_back({n(rng), n(rng), n(rng)});
  Mat3 r = quaternion_to_rotation(sample_random_quaternion(rng));

  auto shaped = shape_segment(seg);
  rotate_shaped(shaped, r);

  SegmentSamples rotated;
  for (const Vec3& v : seg) rotated.push_back(rotate(r, v));
  auto expect = shape_segment(rotated);
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(shaped[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("label threshold: strictly over 3") {
  CHECK(label_from_survey(4) == 1);
  CHECK(label_from_survey(3) == 0);
  CHECK(label_from_survey(0) == 0);
  CHECK(label_from_survey(24) == 1);
  CHECK_THROWS_AS(label_from_survey(-1), DataError);
  CHECK_THROWS_AS(label_from_survey(25), DataError);
  for (int s = 0; s < 24; ++s) CHECK(label_from_survey(s) <= label_from_survey(s + 1));
}

TEST_CASE("load_corpus: empty file gives an empty corpus") {
  auto path = write_temp("tpn_empty.jsonl", "");
  Corpus c = load_corpus(path);
  CHECK(c.patients.empty());
  std::remove(path.c_str());
}

TEST_CASE("load_corpus: absolute times are re-based to the first test") {
  const char* line =
      R"({"patient_id":"P1","label":1,"t_days":7.0,"rate_hz":10,)"
      R"("outbound":[[0.1,0.2,1.0]],"return":[[0.1,0.2,1.0]],"rest":[[0,0,1]]})";
  auto path = write_temp("tpn_rebased.jsonl", std::string(line) + "\n");
  Corpus c = load_corpus(path);
  REQUIRE(c.patients.size() == 1);
  CHECK(c.patients[0].tests[0].test_time_days == 0.0);
  CHECK(c.patients[0].label == 1);
  std::remove(path.c_str());
}

TEST_CASE("load_corpus: conflicting duplicate records are rejected") {
  std::string a =
      R"({"patient_id":"P1","label":1,"t_days":0,"rate_hz":10,)"
      R"("outbound":[[0,0,1]],"return":[[0,0,1]],"rest":[[0,0,1]]})";
  std::string b =
      R"({"patient_id":"P1","label":0,"t_days":1,"rate_hz":10,)"
      R"("outbound":[[0,0,1]],"return":[[0,0,1]],"rest":[[0,0,1]]})";
  auto path = write_temp("tpn_dup.jsonl", a + "\n" + b + "\n");
  CHECK_THROWS_AS(load_corpus(path), DataError);
  std::remove(path.c_str());

  // same patient, duplicate test time
  std::string c =
      R"({"patient_id":"P2","label":1,"t_days":3,"rate_hz":10,)"
      R"("outbound":[[0,0,1]],"return":[[0,0,1]],"rest":[[0,0,1]]})";
  auto path2 = write_temp("tpn_dup2.jsonl", c + "\n" + c + "\n");
  CHECK_THROWS_AS(load_corpus(path2), DataError);
  std::remove(path2.c_str());
}

TEST_CASE("load_corpus: malformed line errors carry the line number") {
  std::string good =
      R"({"patient_id":"P1","label":0,"t_days":0,"rate_hz":10,)"
      R"("outbound":[[0,0,1]],"return":[[0,0,1]],"rest":[[0,0,1]]})";
  auto path = write_temp("tpn_bad.jsonl", good + "\nnot json\n");
  try {
    load_corpus(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("load_corpus: tests outside the window name the patient") {
  std::string a =
      R"({"patient_id":"PX","label":0,"t_days":0,"rate_hz":10,)"
      R"("outbound":[[0,0,1]],"return":[[0,0,1]],"rest":[[0,0,1]]})";
  std::string b =
      R"({"patient_id":"PX","label":0,"t_days":20,"rate_hz":10,)"
      R"("outbound":[[0,0,1]],"return":[[0,0,1]],"rest":[[0,0,1]]})";
  auto path = write_temp("tpn_window.jsonl", a + "\n" + b + "\n");
  try {
    load_corpus(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("PX") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("load_corpus: per-segment quaternions trigger the global-frame transform") {
  const double h = std::sqrt(2.0) / 2.0;
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                R"({"patient_id":"PQ","label":0,"t_days":0,"rate_hz":10,)"
                R"("outbound":[[1,0,0]],"return":[[0,0,1]],"rest":[[0,0,1]],)"
                R"("quaternions":{"outbound":[[0,0,%.16f,%.16f]]}})",
                h, h);
  auto path = write_temp("tpn_quat.jsonl", std::string(buf) + "\n");
  Corpus c = load_corpus(path);
  REQUIRE(c.patients.size() == 1);
  const Vec3& v = c.patients[0].tests[0].segments[0][0];
  CHECK(std::abs(v[0]) < 1e-9);
  CHECK(v[1] == doctest::Approx(1).epsilon(1e-9));
  std::remove(path.c_str());
}
