#include "temppnet/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace temppnet {

std::vector<SweepConfig> default_sweep_configs() {
  std::vector<SweepConfig> configs;
  for (const char* flag : {"none", "no_t0", "last_severity", "avg_severity"})
    configs.push_back({flag, ablation_from_string(flag), 14.0, 10});
  configs.push_back({"window_28d", Ablation::kNone, 28.0, 10});
  configs.push_back({"rate_20hz", Ablation::kNone, 14.0, 20});
  return configs;
}

namespace {

int corpus_rate(const Corpus& corpus) {
  int rate = 0;
  for (const PatientRecord& r : corpus.patients)
    for (const WalkingTest& t : r.tests)
      rate = std::max(rate, static_cast<int>(t.rate_hz));
  return rate;
}

// keep only tests inside the window; drop patients left without tests
Corpus window_filtered(const Corpus& corpus, double window_days) {
  Corpus out;
  out.dropped_samples = corpus.dropped_samples;
  for (const PatientRecord& r : corpus.patients) {
    PatientRecord copy;
    copy.patient_id = r.patient_id;
    copy.label = r.label;
    for (const WalkingTest& t : r.tests)
      if (t.test_time_days <= window_days + 1e-9) copy.tests.push_back(t);
    if (!copy.tests.empty()) out.patients.push_back(std::move(copy));
  }
  return out;
}

}  // namespace

std::vector<SweepRow> run_experiment_suite(const Corpus& corpus,
                                           const std::vector<SweepConfig>& configs,
                                           const SweepOptions& opt) {
  const int rate = corpus_rate(corpus);

  std::vector<SweepRow> rows;
  for (const SweepConfig& cfg : configs) {
    SweepRow row;
    row.model = cfg.name;
    if (cfg.window_days > opt.corpus_window_days + 1e-9) {
      row.skipped = true;
      row.note = "window " + std::to_string(cfg.window_days) +
                 "d exceeds the corpus observation span of " +
                 std::to_string(opt.corpus_window_days) + "d";
      rows.push_back(std::move(row));
      continue;
    }
    if (cfg.rate_hz > rate || rate % cfg.rate_hz != 0) {
      row.skipped = true;
      row.note = "corpus rate " + std::to_string(rate) +
                 " Hz cannot serve " + std::to_string(cfg.rate_hz) + " Hz";
      rows.push_back(std::move(row));
      continue;
    }

    Corpus filtered = window_filtered(corpus, cfg.window_days);
    std::vector<double> f1s, precisions, recalls;
    for (int run = 0; run < opt.runs; ++run) {
      HyperParams hp = opt.hp;
      hp.window_days = cfg.window_days;
      hp.rate_hz = cfg.rate_hz;
      TempPNet model(hp, cfg.ablation);
      const std::uint64_t seed = opt.base_seed + static_cast<std::uint64_t>(run);
      model.init(seed);
      TrainConfig tc;
      tc.epochs = opt.epochs;
      tc.seed = seed;
      tc.ablation = cfg.ablation;
      tc.threads = opt.threads;
      tc.augment = opt.augment;
      tc.patience = opt.patience;
      TrainResult r = train(model, filtered, tc);
      f1s.push_back(r.test_metrics.f1);
      precisions.push_back(r.test_metrics.precision);
      recalls.push_back(r.test_metrics.recall);
    }
    row.f1 = mean_std(f1s);
    row.precision = mean_std(precisions);
    row.recall = mean_std(recalls);
    row.econ = econ_analysis(row.precision.mean, row.recall.mean);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("write_sweep_csv: cannot write " + path);
  out << "model,f1_mean,f1_std,precision_mean,precision_std,recall_mean,recall_std,"
         "benefit,cost,net\n";
  out.precision(6);
  out << std::fixed;
  for (const SweepRow& r : rows) {
    if (r.skipped) {
      out << r.model << ",,,,,,,,,\n";
      continue;
    }
    out << r.model << "," << r.f1.mean << "," << r.f1.stddev << ","
        << r.precision.mean << "," << r.precision.stddev << "," << r.recall.mean
        << "," << r.recall.stddev << "," << r.econ.benefit_tp << "," << r.econ.cost_fp
        << "," << r.econ.net << "\n";
  }
}

}  // namespace temppnet
