#pragma once

#include <string>
#include <vector>

#include "temppnet/metrics.hpp"
#include "temppnet/model.hpp"

// Multi-seed experiment tables: ablation variants plus observation-window
// and signal-frequency rows, each trained R times and reported as
// mean +/- std with the economic columns attached.

namespace temppnet {

struct SweepConfig {
  std::string name;
  Ablation ablation = Ablation::kNone;
  double window_days = 14.0;
  int rate_hz = 10;
};

struct SweepRow {
  std::string model;
  MeanStd f1, precision, recall;
  EconRow econ;  // from the mean precision/recall
  bool skipped = false;
  std::string note;
};

struct SweepOptions {
  int runs = 3;
  int epochs = 5;
  std::uint64_t base_seed = 7;
  int threads = 0;
  HyperParams hp;
  bool augment = true;
  int patience = 10;
  double corpus_window_days = 14.0;  // the data's observation design
};

// The desk-scale default: the four ablation rows plus one window and one
// frequency row beyond the corpus defaults.
std::vector<SweepConfig> default_sweep_configs();

// Trains each feasible config with runs seeds (base_seed, base_seed+1, ...)
// and reports test-split metrics. Infeasible configs (window longer than
// the corpus span, frequency above the corpus rate) come back skipped with
// a note. One row per config, in order.
std::vector<SweepRow> run_experiment_suite(const Corpus& corpus,
                                           const std::vector<SweepConfig>& configs,
                                           const SweepOptions& opt);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace temppnet
