#include "temppnet/gait.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace temppnet {

const std::array<const char*, 20>& GaitFeatures::names() {
  static const std::array<const char*, 20> kNames = {
      "u_x",          "u_y",          "u_z",          "sd_x",
      "sd_y",         "sd_z",         "u_mag",        "sd_mag",
      "jerk_u_x",     "jerk_u_y",     "jerk_u_z",     "jerk_sd_x",
      "jerk_sd_y",    "jerk_sd_z",    "jerk_u_mag",   "jerk_sd_mag",
      "stride_var_x", "stride_var_y", "stride_var_z", "stride_var_mag"};
  return kNames;
}

std::array<double, 20> GaitFeatures::values() const {
  return {u_x,       u_y,       u_z,        sd_x,        sd_y,          sd_z,
          u_mag,     sd_mag,    jerk_u_x,   jerk_u_y,    jerk_u_z,      jerk_sd_x,
          jerk_sd_y, jerk_sd_z, jerk_u_mag, jerk_sd_mag, stride_var_x,
          stride_var_y, stride_var_z, stride_var_mag};
}

std::vector<int> detect_peaks(const std::vector<double>& series,
                              const PeakOptions& opt) {
  const int n = static_cast<int>(series.size());
  if (n < 3) return {};
  double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  std::vector<int> candidates;
  for (int i = 1; i + 1 < n; ++i)
    if (series[i] > series[i - 1] && series[i] > series[i + 1] && series[i] > mean)
      candidates.push_back(i);
  // larger value wins a conflict; equal values go to the lower index
  std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    if (series[a] != series[b]) return series[a] > series[b];
    return a < b;
  });
  std::vector<int> kept;
  for (int c : candidates) {
    bool blocked = false;
    for (int k : kept)
      if (std::abs(k - c) < opt.min_separation) {
        blocked = true;
        break;
      }
    if (!blocked) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// sample standard deviation with an explicit divisor
double stddev_div(const std::vector<double>& v, double mean, int divisor) {
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / divisor);
}

// stride-time variability from peak indices: Q peaks, Q-1 stride times,
// divisor Q-2
double stride_variability(const std::vector<int>& peaks, bool* flagged) {
  const int q = static_cast<int>(peaks.size());
  if (q < 3) {
    *flagged = true;
    return 0.0;
  }
  std::vector<double> dt(q - 1);
  for (int i = 0; i + 1 < q; ++i) dt[i] = peaks[i + 1] - peaks[i];
  const double m = mean_of(dt);
  return stddev_div(dt, m, q - 2);
}

}  // namespace

GaitFeatures extract_features(const SegmentSamples& samples, const PeakOptions& opt) {
  const int L = static_cast<int>(samples.size());
  if (L < 3)
    throw DataError("extract_features: need at least 3 samples, got " +
                    std::to_string(L));
  std::array<std::vector<double>, 4> axis;  // x, y, z, magnitude
  for (auto& a : axis) a.reserve(L);
  for (const Vec3& v : samples) {
    axis[0].push_back(v[0]);
    axis[1].push_back(v[1]);
    axis[2].push_back(v[2]);
    axis[3].push_back(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
  }

  GaitFeatures f;
  f.u_x = mean_of(axis[0]);
  f.u_y = mean_of(axis[1]);
  f.u_z = mean_of(axis[2]);
  f.sd_x = stddev_div(axis[0], f.u_x, L - 1);
  f.sd_y = stddev_div(axis[1], f.u_y, L - 1);
  f.sd_z = stddev_div(axis[2], f.u_z, L - 1);
  f.u_mag = mean_of(axis[3]);
  f.sd_mag = stddev_div(axis[3], f.u_mag, L - 1);

  std::array<std::vector<double>, 3> jerk;
  std::vector<double> jerk_mag(L - 1);
  for (int a = 0; a < 3; ++a) {
    jerk[a].resize(L - 1);
    for (int l = 0; l + 1 < L; ++l) jerk[a][l] = axis[a][l + 1] - axis[a][l];
  }
  for (int l = 0; l + 1 < L; ++l)
    jerk_mag[l] = std::sqrt(jerk[0][l] * jerk[0][l] + jerk[1][l] * jerk[1][l] +
                            jerk[2][l] * jerk[2][l]);
  f.jerk_u_x = mean_of(jerk[0]);
  f.jerk_u_y = mean_of(jerk[1]);
  f.jerk_u_z = mean_of(jerk[2]);
  f.jerk_sd_x = stddev_div(jerk[0], f.jerk_u_x, L - 2);
  f.jerk_sd_y = stddev_div(jerk[1], f.jerk_u_y, L - 2);
  f.jerk_sd_z = stddev_div(jerk[2], f.jerk_u_z, L - 2);
  f.jerk_u_mag = mean_of(jerk_mag);
  f.jerk_sd_mag = stddev_div(jerk_mag, f.jerk_u_mag, L - 2);

  f.stride_var_x = stride_variability(detect_peaks(axis[0], opt), &f.stride_flag[0]);
  f.stride_var_y = stride_variability(detect_peaks(axis[1], opt), &f.stride_flag[1]);
  f.stride_var_z = stride_variability(detect_peaks(axis[2], opt), &f.stride_flag[2]);
  f.stride_var_mag = stride_variability(detect_peaks(axis[3], opt), &f.stride_flag[3]);
  return f;
}

GaitFeatures features_for_test(const WalkingTest& test, const FeatureOptions& opt) {
  SegmentSamples joined = test.segments[WalkingTest::kOutbound];
  const SegmentSamples& ret = test.segments[WalkingTest::kReturn];
  joined.insert(joined.end(), ret.begin(), ret.end());
  if (opt.include_rest) {
    const SegmentSamples& rest = test.segments[WalkingTest::kRest];
    joined.insert(joined.end(), rest.begin(), rest.end());
  }
  return extract_features(joined, opt.peaks);
}

namespace {

struct Standardizer {
  std::array<double, 20> mean{};
  std::array<double, 20> sd{};

  static Standardizer fit(const std::vector<std::array<double, 20>>& xs) {
    Standardizer s;
    const double n = static_cast<double>(xs.size());
    for (const auto& x : xs)
      for (int d = 0; d < 20; ++d) s.mean[d] += x[d] / n;
    for (const auto& x : xs)
      for (int d = 0; d < 20; ++d)
        s.sd[d] += (x[d] - s.mean[d]) * (x[d] - s.mean[d]) / n;
    for (int d = 0; d < 20; ++d) {
      s.sd[d] = std::sqrt(s.sd[d]);
      if (s.sd[d] < 1e-12) s.sd[d] = 1.0;
    }
    return s;
  }

  std::array<double, 20> apply(const std::array<double, 20>& x) const {
    std::array<double, 20> out;
    for (int d = 0; d < 20; ++d) out[d] = (x[d] - mean[d]) / sd[d];
    return out;
  }
};

double sqdist(const std::array<double, 20>& a, const std::array<double, 20>& b) {
  double acc = 0;
  for (int d = 0; d < 20; ++d) acc += (a[d] - b[d]) * (a[d] - b[d]);
  return acc;
}

}  // namespace

ReferenceResult reference_classify(const std::vector<std::array<double, 20>>& train_x,
                                   const std::vector<int>& train_y,
                                   const std::vector<std::array<double, 20>>& test_x,
                                   const std::vector<int>& test_y, int k) {
  if (train_x.empty() || train_x.size() != train_y.size())
    throw DataError("reference_classify: bad training data");
  const bool has_pos = std::find(train_y.begin(), train_y.end(), 1) != train_y.end();
  const bool has_neg = std::find(train_y.begin(), train_y.end(), 0) != train_y.end();
  if (!has_pos || !has_neg)
    throw DataError("reference_classify: single-class training set");

  Standardizer st = Standardizer::fit(train_x);
  std::vector<std::array<double, 20>> xtr(train_x.size()), xte(test_x.size());
  for (std::size_t i = 0; i < train_x.size(); ++i) xtr[i] = st.apply(train_x[i]);
  for (std::size_t i = 0; i < test_x.size(); ++i) xte[i] = st.apply(test_x[i]);

  // k-NN majority vote; distance ties resolved by training index
  std::vector<int> knn_pred(xte.size());
  for (std::size_t i = 0; i < xte.size(); ++i) {
    std::vector<std::pair<double, int>> d(xtr.size());
    for (std::size_t j = 0; j < xtr.size(); ++j)
      d[j] = {sqdist(xte[i], xtr[j]), static_cast<int>(j)};
    const int kk = std::min<int>(k, static_cast<int>(d.size()));
    std::partial_sort(d.begin(), d.begin() + kk, d.end());
    int votes = 0;
    for (int j = 0; j < kk; ++j) votes += train_y[d[j].second];
    knn_pred[i] = 2 * votes > kk ? 1 : 0;
  }

  // logistic regression, full-batch gradient descent
  std::array<double, 20> w{};
  double b = 0;
  const double lr = 0.1, l2 = 1e-3;
  const int iters = 500;
  const double n = static_cast<double>(xtr.size());
  for (int it = 0; it < iters; ++it) {
    std::array<double, 20> gw{};
    double gb = 0;
    for (std::size_t i = 0; i < xtr.size(); ++i) {
      double z = b;
      for (int d = 0; d < 20; ++d) z += w[d] * xtr[i][d];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double err = p - train_y[i];
      for (int d = 0; d < 20; ++d) gw[d] += err * xtr[i][d] / n;
      gb += err / n;
    }
    for (int d = 0; d < 20; ++d) w[d] -= lr * (gw[d] + l2 * w[d]);
    b -= lr * gb;
  }
  std::vector<int> lr_pred(xte.size());
  for (std::size_t i = 0; i < xte.size(); ++i) {
    double z = b;
    for (int d = 0; d < 20; ++d) z += w[d] * xte[i][d];
    lr_pred[i] = z > 0 ? 1 : 0;
  }

  ReferenceResult r;
  r.knn = compute_metrics_binary(knn_pred, test_y);
  r.logreg = compute_metrics_binary(lr_pred, test_y);
  return r;
}

}  // namespace temppnet
