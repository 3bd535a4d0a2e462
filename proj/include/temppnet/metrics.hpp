#pragma once

#include <stdexcept>
#include <vector>

// Classification metrics and the annualized economic-benefit calculator.

namespace temppnet {

struct MetricsRow {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Precision/recall/F1 on the positive class at threshold 0.5. With no
// positive predictions precision falls back to 0 by convention.
MetricsRow compute_metrics(const std::vector<double>& probabilities,
                           const std::vector<int>& labels);
MetricsRow compute_metrics_binary(const std::vector<int>& predictions,
                                  const std::vector<int>& labels);

struct EconRow {
  double benefit_tp = 0;  // billions
  double cost_fp = 0;
  double net = 0;
};

// benefit = untreated_base * recall, cost = treatment_base * fp_share *
// (1 - precision), net = benefit - cost. The "up to" bound is applied as
// the literal product.
struct EconConstants {
  double untreated_base = 139.95;  // billions, mobile share of untreated cost
  double treatment_base = 304.0;   // billions, mobile share of treatment cost
  double fp_share = 0.2;
};

EconRow econ_analysis(double precision, double recall,
                      const EconConstants& c = {});

struct MeanStd {
  double mean = 0;
  double stddev = 0;  // population over runs; 0 for a single run
};

MeanStd mean_std(const std::vector<double>& xs);

}  // namespace temppnet
