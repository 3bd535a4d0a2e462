#include "temppnet/metrics.hpp"

#include <cmath>

namespace temppnet {

MetricsRow compute_metrics_binary(const std::vector<int>& predictions,
                                  const std::vector<int>& labels) {
  if (predictions.empty() || predictions.size() != labels.size())
    throw std::invalid_argument("compute_metrics: empty or mismatched inputs");
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == 1 && labels[i] == 1) ++tp;
    if (predictions[i] == 1 && labels[i] == 0) ++fp;
    if (predictions[i] == 0 && labels[i] == 1) ++fn;
  }
  MetricsRow m;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

MetricsRow compute_metrics(const std::vector<double>& probabilities,
                           const std::vector<int>& labels) {
  std::vector<int> pred(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i)
    pred[i] = probabilities[i] > 0.5 ? 1 : 0;
  return compute_metrics_binary(pred, labels);
}

EconRow econ_analysis(double precision, double recall, const EconConstants& c) {
  EconRow r;
  r.benefit_tp = c.untreated_base * recall;
  r.cost_fp = c.treatment_base * c.fp_share * (1.0 - precision);
  r.net = r.benefit_tp - r.cost_fp;
  return r;
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double acc = 0;
  for (double x : xs) acc += (x - r.mean) * (x - r.mean);
  r.stddev = std::sqrt(acc / static_cast<double>(xs.size()));
  return r;
}

}  // namespace temppnet
