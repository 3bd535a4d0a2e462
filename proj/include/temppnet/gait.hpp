#pragma once

#include <array>
#include <string>
#include <vector>

#include "temppnet/metrics.hpp"
#include "temppnet/sensor.hpp"

// Handcrafted gait features over accelerometer sequences, and two small
// reference classifiers over them (5-NN and an L2-regularized logistic
// regression).

namespace temppnet {

struct GaitFeatures {
  double u_x = 0, u_y = 0, u_z = 0;
  double sd_x = 0, sd_y = 0, sd_z = 0;
  double u_mag = 0, sd_mag = 0;
  double jerk_u_x = 0, jerk_u_y = 0, jerk_u_z = 0;
  double jerk_sd_x = 0, jerk_sd_y = 0, jerk_sd_z = 0;
  double jerk_u_mag = 0, jerk_sd_mag = 0;
  double stride_var_x = 0, stride_var_y = 0, stride_var_z = 0, stride_var_mag = 0;
  // set when an axis had fewer than 3 peaks and its stride variability
  // was reported as 0
  std::array<bool, 4> stride_flag{false, false, false, false};

  static const std::array<const char*, 20>& names();
  std::array<double, 20> values() const;
};

struct PeakOptions {
  int min_separation = 3;  // samples; 0.3 s at 10 Hz
};

// Strict local maxima above the series mean with a minimum inter-peak
// separation; conflicts keep the larger value, ties the lower index.
std::vector<int> detect_peaks(const std::vector<double>& series,
                              const PeakOptions& opt = {});

// All Table-style statistics of one sample sequence (length >= 3).
GaitFeatures extract_features(const SegmentSamples& samples,
                              const PeakOptions& opt = {});

struct FeatureOptions {
  bool include_rest = false;  // stride features are undefined when standing
  PeakOptions peaks;
};

// Per-test features over the concatenated walking segments.
GaitFeatures features_for_test(const WalkingTest& test,
                               const FeatureOptions& opt = {});

struct ReferenceResult {
  MetricsRow knn;
  MetricsRow logreg;
};

// 5-nearest-neighbor vote and a logistic regression trained by gradient
// descent, both over features z-scored with training-split statistics.
ReferenceResult reference_classify(const std::vector<std::array<double, 20>>& train_x,
                                   const std::vector<int>& train_y,
                                   const std::vector<std::array<double, 20>>& test_x,
                                   const std::vector<int>& test_y, int k = 5);

}  // namespace temppnet
