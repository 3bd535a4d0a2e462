#pragma once

#include <array>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

// Walking-test data model and preprocessing: quaternion rotation to the
// global frame, resampling, segment shaping, rotation augmentation,
// label thresholding, and JSONL corpus ingestion.

namespace temppnet {

using Vec3 = std::array<double, 3>;
using Quat = std::array<double, 4>;  // x, y, z, w
using Mat3 = std::array<double, 9>;  // row-major
using SegmentSamples = std::vector<Vec3>;

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RawSample {
  Vec3 accel_local{};
  Quat quaternion{0, 0, 0, 1};
};

// One walking test: outbound, return and rest segments of global-frame
// acceleration, and the test time in days since the patient's first test.
struct WalkingTest {
  double test_time_days = 0.0;
  double rate_hz = 10.0;
  std::array<SegmentSamples, 3> segments;  // outbound, return, rest

  static constexpr int kOutbound = 0;
  static constexpr int kReturn = 1;
  static constexpr int kRest = 2;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<WalkingTest> tests;  // ordered by test_time_days, first at 0
  int label = 0;                   // 1 = depressed
};

// Rotation matrix of a quaternion [x,y,z,w]; normalizes first, rejects a
// zero quaternion.
Mat3 quaternion_to_rotation(const Quat& q);

Vec3 rotate(const Mat3& r, const Vec3& v);

struct GlobalFrameResult {
  SegmentSamples samples;
  int dropped = 0;  // samples without a usable quaternion
};

// Rotates each sample by its own quaternion. Samples whose quaternion is
// missing (index beyond the quaternion list) or off-unit by more than
// 1e-3 are dropped and counted.
GlobalFrameResult to_global_frame(const SegmentSamples& local,
                                  const std::vector<Quat>& quats);

// Non-overlapping block mean decimation; the trailing partial block is
// averaged as-is. from_hz must be divisible by to_hz.
SegmentSamples resample(const SegmentSamples& seg, int from_hz, int to_hz);

inline constexpr int kSegmentChannels = 3;
inline constexpr int kSegmentLength = 300;

// 3x300 row-major matrix: zero-pad short segments on the right, truncate
// long ones.
std::vector<double> shape_segment(const SegmentSamples& seg);

// [x*sin(t/2), y*sin(t/2), z*sin(t/2), cos(t/2)] for a unit axis.
Quat quaternion_from_axis_angle(const Vec3& axis, double theta);

// Random rotation quaternion: axis from normalized uniforms, angle from
// Uniform(0, 2*pi).
Quat sample_random_quaternion(std::mt19937_64& rng);

WalkingTest apply_rotation(const WalkingTest& test, const Mat3& r);

// One fresh random rotation applied to every sample of all segments.
// Training-time augmentation only; inference uses the original test.
WalkingTest augment_rotation(const WalkingTest& test, std::mt19937_64& rng);

// Rotates a shaped 3x300 matrix column-wise in place (rotation commutes
// with block-mean resampling and zero padding).
void rotate_shaped(std::vector<double>& shaped, const Mat3& r);

// 1 when the 0..24 survey score is strictly over 3.
int label_from_survey(int score);

struct CorpusLoadOptions {
  double window_days = 14.0;
};

struct Corpus {
  std::vector<PatientRecord> patients;
  int dropped_samples = 0;
};

// Loads the JSONL corpus (one object per walking test). Per-patient test
// times are re-based so the first test is at day 0; tests outside the
// observation window are an error. Patient order is first appearance.
Corpus load_corpus(const std::string& path, const CorpusLoadOptions& opt = {});

}  // namespace temppnet
