#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "temppnet/experiments.hpp"
#include "temppnet/metrics.hpp"
#include "temppnet/synth.hpp"

using namespace temppnet;

TEST_CASE("perfect predictions give precision, recall, F1 of 1") {
  MetricsRow m = compute_metrics({0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0});
  CHECK(m.precision == doctest::Approx(1.0));
  CHECK(m.recall == doctest::Approx(1.0));
  CHECK(m.f1 == doctest::Approx(1.0));
}

TEST_CASE("TP=2 FP=1 FN=1 gives 2/3 across the board") {
  // preds: 1,1,1,0 ; labels: 1,1,0,1
  MetricsRow m = compute_metrics_binary({1, 1, 1, 0}, {1, 1, 0, 1});
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("no positive predictions fall back to zero by convention") {
  MetricsRow m = compute_metrics_binary({0, 0, 0}, {1, 0, 1});
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
}

TEST_CASE("empty input is rejected") {
  CHECK_THROWS(compute_metrics({}, {}));
  CHECK_THROWS(compute_metrics({0.5}, {1, 0}));
}

TEST_CASE("metrics are invariant under permutation of the pairs") {
  std::mt19937_64 rng(5);
  std::vector<int> pred, lab;
  std::bernoulli_distribution coin(0.4);
  for (int i = 0; i < 50; ++i) {
    pred.push_back(coin(rng) ? 1 : 0);
    lab.push_back(coin(rng) ? 1 : 0);
  }
  MetricsRow a = compute_metrics_binary(pred, lab);
  std::vector<int> idx(50);
  for (int i = 0; i < 50; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<int> pred2, lab2;
  for (int i : idx) {
    pred2.push_back(pred[i]);
    lab2.push_back(lab[i]);
  }
  MetricsRow b = compute_metrics_binary(pred2, lab2);
  CHECK(a.precision == doctest::Approx(b.precision));
  CHECK(a.recall == doctest::Approx(b.recall));
  CHECK(a.f1 == doctest::Approx(b.f1));
}

TEST_CASE("economic analysis reproduces the published model rows") {
  struct Row {
    const char* model;
    double precision, recall, benefit, cost, net;
  };
  // ten model rows: precision/recall in, benefit/cost/net out
  const Row rows[] = {
      {"TempPNet", 0.737, 0.796, 111.400, 15.990, 95.410},
      {"ProtoPNet", 0.554, 0.761, 106.502, 27.117, 79.385},
      {"ProSeNet", 0.555, 0.814, 113.919, 27.056, 86.863},
      {"CNN", 0.534, 0.861, 120.497, 28.333, 92.164},
      {"RNN", 0.544, 0.870, 121.757, 27.725, 94.032},
      {"KNN", 0.567, 0.469, 65.637, 26.326, 39.310},
      {"SVM", 0.577, 0.741, 103.703, 25.718, 77.985},
      {"RandomForest", 0.600, 0.630, 88.169, 24.320, 63.849},
      {"AdaBoost", 0.557, 0.543, 75.993, 26.934, 49.058},
      {"XGBoost", 0.616, 0.556, 77.812, 23.347, 54.465},
  };
  for (const Row& r : rows) {
    EconRow e = econ_analysis(r.precision, r.recall);
    INFO(r.model);
    CHECK(std::abs(e.benefit_tp - r.benefit) < 0.01);
    CHECK(std::abs(e.cost_fp - r.cost) < 0.01);
    CHECK(std::abs(e.net - r.net) < 0.01);
  }
}

TEST_CASE("zero precision and recall evaluate the formulas literally") {
  // the published no-intervention row zeroes this by fiat; the calculator
  // applies the formulas as written
  EconRow e = econ_analysis(0.0, 0.0);
  CHECK(e.benefit_tp == doctest::Approx(0.0));
  CHECK(e.cost_fp == doctest::Approx(60.8));
  CHECK(e.net == doctest::Approx(-60.8));
}

TEST_CASE("mean and std over runs; single run has zero std") {
  MeanStd ms = mean_std({0.7});
  CHECK(ms.mean == doctest::Approx(0.7));
  CHECK(ms.stddev == 0.0);
  MeanStd ms2 = mean_std({1.0, 3.0});
  CHECK(ms2.mean == doctest::Approx(2.0));
  CHECK(ms2.stddev == doctest::Approx(1.0));
}

TEST_CASE("experiment suite: one row per config, skips with notes, R=1 std 0") {
  GenOptions gen;
  gen.n_patients = 10;
  gen.seed = 5;
  gen.max_tests = 2;
  Corpus corpus = generate_records(gen);

  SweepOptions opt;
  opt.runs = 1;
  opt.epochs = 1;
  opt.hp.num_symptoms = 2;
  opt.hp.time_dim = 4;
  opt.hp.k_per_class = 1;
  auto configs = default_sweep_configs();
  auto rows = run_experiment_suite(corpus, configs, opt);
  REQUIRE(rows.size() == configs.size());

  int skipped = 0;
  for (const SweepRow& r : rows) {
    if (r.skipped) {
      ++skipped;
      CHECK_FALSE(r.note.empty());
      continue;
    }
    CHECK(r.f1.stddev == 0.0);
    CHECK(r.precision.stddev == 0.0);
    CHECK(r.f1.mean >= 0.0);
    CHECK(r.f1.mean <= 1.0);
  }
  // the 28-day window and 20 Hz rows cannot run on a 14-day 10 Hz corpus
  CHECK(skipped == 2);
  CHECK(rows[4].skipped);
  CHECK(rows[5].skipped);

  write_sweep_csv(rows, "/tmp/tpn_sweep.csv");
  std::ifstream in("/tmp/tpn_sweep.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "model,f1_mean,f1_std,precision_mean,precision_std,recall_mean,recall_std,"
        "benefit,cost,net");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == static_cast<int>(configs.size()));
  std::remove("/tmp/tpn_sweep.csv");
}
