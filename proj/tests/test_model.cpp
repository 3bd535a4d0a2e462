#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "temppnet/model.hpp"
#include "temppnet/synth.hpp"

using namespace temppnet;

namespace {

// small hyperparameters keep the unit tests fast; the acceptance suite
// runs the full-size configuration
HyperParams small_hp() {
  HyperParams hp;
  hp.num_symptoms = 3;
  hp.time_dim = 8;
  hp.k_per_class = 2;
  hp.batch_size = 6;
  return hp;
}

Corpus small_corpus(int n = 8, std::uint64_t seed = 5) {
  GenOptions opt;
  opt.n_patients = n;
  opt.seed = seed;
  opt.max_tests = 3;
  return generate_records(opt);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("regularizer hand values") {
  // one depressed patient at average severity 0.9, one non-depressed at 0.2
  CHECK(symptom_regularizer({{0.9}, {0.2}}, {1, 0}) == doctest::Approx(-0.7));
  // K=1, depressed patient with s+ = 0.9, s- = 0.2, no non-depressed patients
  CHECK(trend_regularizer({{0.9, 0.2}}, {1}, 1) == doctest::Approx(-0.7));
  // absent classes contribute zero
  CHECK(symptom_regularizer({{0.5, 0.7}}, {1}) == doctest::Approx(-0.6));
  CHECK(trend_regularizer({{0.4, 0.6}}, {0}, 1) == doctest::Approx(0.4 - 0.6));
}

TEST_CASE("prediction consistency: evidence reproduces the class formula") {
  Corpus corpus = small_corpus();
  TempPNet model(small_hp());
  model.init(11);
  const int k = model.hyperparams().k_per_class;
  for (const PatientRecord& rec : corpus.patients) {
    auto ev = model.predict(model.prepare(rec));
    REQUIRE(static_cast<int>(ev.trend_strengths.size()) == 2 * k);
    double pos = 0, neg = 0;
    for (int i = 0; i < k; ++i) pos += ev.trend_strengths[i];
    for (int i = k; i < 2 * k; ++i) neg += ev.trend_strengths[i];
    const double expect = 1.0 / (1.0 + std::exp(-(pos - neg)));
    CHECK(ev.probability == doctest::Approx(expect).epsilon(1e-12));
    // decision threshold 0.5 is the strength-sum comparison
    CHECK((ev.probability > 0.5) == (pos > neg));
    CHECK(ev.probability > 0.0);
    CHECK(ev.probability < 1.0);
    for (double t0 : ev.start_times) {
      CHECK(t0 > -model.hyperparams().horizon_days);
      CHECK(t0 < 0.0);
    }
  }
}

TEST_CASE("hand arithmetic for the class formula at K=1") {
  // s+ = 0.8, s- = 0.3 -> P = sigmoid(0.5)
  const double p = 1.0 / (1.0 + std::exp(-(0.8 - 0.3)));
  CHECK(p == doctest::Approx(0.6225).epsilon(1e-4));
}

TEST_CASE("loss with zero regularizer weights equals mean cross-entropy") {
  Corpus corpus = small_corpus(6);
  HyperParams hp = small_hp();
  hp.lambda_s = 0.0;
  hp.lambda_t = 0.0;
  TempPNet model(hp);
  model.init(13);

  std::vector<TempPNet::Prepared> prepared;
  for (const PatientRecord& r : corpus.patients) prepared.push_back(model.prepare(r));
  std::vector<const TempPNet::Prepared*> batch;
  for (const auto& p : prepared) batch.push_back(&p);

  const double loss = model.batch_loss(batch, /*training=*/false, false);
  double expect = 0;
  for (const auto& p : prepared) {
    const double prob = model.predict(p).probability;
    expect += -std::log(p.label == 1 ? prob : 1.0 - prob) / batch.size();
  }
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("full loss decomposes into cross-entropy plus weighted regularizers") {
  Corpus corpus = small_corpus(6, 17);
  HyperParams hp = small_hp();
  TempPNet model(hp);
  model.init(19);
  HyperParams hp0 = hp;
  hp0.lambda_s = 0.0;
  hp0.lambda_t = 0.0;
  TempPNet plain(hp0);
  plain.init(19);  // identical parameters, different lambdas

  std::vector<TempPNet::Prepared> prepared;
  for (const PatientRecord& r : corpus.patients) prepared.push_back(model.prepare(r));
  std::vector<const TempPNet::Prepared*> batch;
  for (const auto& p : prepared) batch.push_back(&p);

  const double with_reg = model.batch_loss(batch, false, false);
  const double without = plain.batch_loss(batch, false, false);

  // recompute both regularizers from eval-mode evidence
  std::vector<std::vector<double>> avg_sev, strengths;
  std::vector<int> labels;
  for (const auto& p : prepared) {
    auto ev = model.predict(p);
    std::vector<double> avg(hp.num_symptoms, 0.0);
    for (const auto& col : ev.severities)
      for (int m = 0; m < hp.num_symptoms; ++m) avg[m] += col[m] / ev.severities.size();
    avg_sev.push_back(avg);
    strengths.push_back(ev.trend_strengths);
    labels.push_back(p.label);
  }
  const double rs = symptom_regularizer(avg_sev, labels);
  const double rt = trend_regularizer(strengths, labels, hp.k_per_class);
  CHECK(with_reg - without ==
        doctest::Approx(hp.lambda_s * rs + hp.lambda_t * rt).epsilon(1e-9));
}

TEST_CASE("threaded and sequential batch losses agree bitwise") {
  Corpus corpus = small_corpus(5, 23);
  TempPNet model(small_hp());
  model.init(29);
  std::vector<TempPNet::Prepared> prepared;
  for (const PatientRecord& r : corpus.patients) prepared.push_back(model.prepare(r));
  std::vector<const TempPNet::Prepared*> batch;
  for (const auto& p : prepared) batch.push_back(&p);

  const double seq = model.batch_loss(batch, true, true, 1);
  std::vector<std::vector<double>> seq_grads;
  for (ad::Param* p : model.parameters()) {
    seq_grads.push_back(p->grad);
    p->zero_grad();
  }
  const double par = model.batch_loss(batch, true, true, 2);
  std::size_t idx = 0;
  for (ad::Param* p : model.parameters()) {
    CHECK(p->grad == seq_grads[idx]);  // exact
    ++idx;
    p->zero_grad();
  }
  CHECK(seq == par);
}

TEST_CASE("ablation flags parse and unknown flags are rejected") {
  CHECK(ablation_from_string("none") == Ablation::kNone);
  CHECK(ablation_from_string("no_t0") == Ablation::kNoStartTime);
  CHECK(ablation_from_string("last_severity") == Ablation::kLastSeverity);
  CHECK(ablation_from_string("avg_severity") == Ablation::kAvgSeverity);
  CHECK_THROWS_AS(ablation_from_string("bogus"), DataError);
}

TEST_CASE("no_t0 pins every start time to zero") {
  Corpus corpus = small_corpus(4, 31);
  TempPNet model(small_hp(), Ablation::kNoStartTime);
  model.init(37);
  for (const PatientRecord& rec : corpus.patients) {
    auto ev = model.predict(model.prepare(rec));
    for (double t0 : ev.start_times) CHECK(t0 == 0.0);
    CHECK(ev.probability > 0.0);
    CHECK(ev.probability < 1.0);
  }
}

TEST_CASE("last- and average-severity variants coincide for single-test patients") {
  GenOptions opt;
  opt.n_patients = 4;
  opt.seed = 41;
  opt.min_tests = 1;
  opt.max_tests = 1;
  Corpus corpus = generate_records(opt);

  TempPNet last(small_hp(), Ablation::kLastSeverity);
  TempPNet avg(small_hp(), Ablation::kAvgSeverity);
  last.init(43);
  avg.init(43);
  for (const PatientRecord& rec : corpus.patients) {
    const double pl = last.predict(last.prepare(rec)).probability;
    const double pa = avg.predict(avg.prepare(rec)).probability;
    CHECK(pl == doctest::Approx(pa).epsilon(1e-12));
    CHECK(pl > 0.0);
    CHECK(pl < 1.0);
  }
}

TEST_CASE("stratified split holds the 60/20/20 proportions per class") {
  std::vector<int> labels;
  for (int i = 0; i < 50; ++i) labels.push_back(1);
  for (int i = 0; i < 50; ++i) labels.push_back(0);
  Split s = stratified_split(labels, 0.6, 0.2, 7);
  CHECK(s.train.size() == 60);
  CHECK(s.val.size() == 20);
  CHECK(s.test.size() == 20);
  auto count_pos = [&](const std::vector<int>& idx) {
    int c = 0;
    for (int i : idx) c += labels[i];
    return c;
  };
  CHECK(count_pos(s.train) == 30);
  CHECK(count_pos(s.val) == 10);
  CHECK(count_pos(s.test) == 10);
  // disjoint cover
  std::vector<int> all;
  for (auto* v : {&s.train, &s.val, &s.test}) all.insert(all.end(), v->begin(), v->end());
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 100; ++i) CHECK(all[i] == i);
}

TEST_CASE("zero epochs return the initialization unchanged") {
  Corpus corpus = small_corpus(10, 47);
  TempPNet model(small_hp());
  model.init(53);
  auto before = model.snapshot();
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 53;
  TrainResult r = train(model, corpus, cfg);
  CHECK(r.history.empty());
  auto after = model.snapshot();
  REQUIRE(before.values.size() == after.values.size());
  for (std::size_t i = 0; i < before.values.size(); ++i)
    CHECK(before.values[i] == after.values[i]);
}

TEST_CASE("training is bitwise deterministic given the seed") {
  Corpus corpus = small_corpus(8, 59);
  auto run = [&]() {
    TempPNet model(small_hp());
    model.init(61);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 61;
    cfg.threads = 2;
    TrainResult r = train(model, corpus, cfg);
    return std::make_pair(model.snapshot(), r);
  };
  auto [snap_a, res_a] = run();
  auto [snap_b, res_b] = run();
  REQUIRE(snap_a.values.size() == snap_b.values.size());
  for (std::size_t i = 0; i < snap_a.values.size(); ++i)
    CHECK(snap_a.values[i] == snap_b.values[i]);
  REQUIRE(res_a.history.size() == res_b.history.size());
  for (std::size_t e = 0; e < res_a.history.size(); ++e)
    CHECK(res_a.history[e].train_loss == res_b.history[e].train_loss);
  CHECK(res_a.test_ids == res_b.test_ids);
}

TEST_CASE("single-class corpora are rejected") {
  GenOptions opt;
  opt.n_patients = 4;
  opt.seed = 67;
  Corpus corpus = generate_records(opt);
  for (PatientRecord& r : corpus.patients) r.label = 1;
  TempPNet model(small_hp());
  model.init(71);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(model, corpus, cfg), DataError);
}

TEST_CASE("checkpoint round-trip: identical bytes and identical predictions") {
  Corpus corpus = small_corpus(4, 73);
  TempPNet model(small_hp(), Ablation::kNoStartTime);
  model.init(79);

  std::vector<double> before;
  for (const PatientRecord& r : corpus.patients)
    before.push_back(model.predict(model.prepare(r)).probability);

  const std::string p1 = "/tmp/tpn_ckpt1.bin", p2 = "/tmp/tpn_ckpt2.bin";
  save_checkpoint(model, p1);
  TempPNet loaded = load_checkpoint(p1);
  CHECK(loaded.ablation() == Ablation::kNoStartTime);
  CHECK(loaded.hyperparams().num_symptoms == 3);
  save_checkpoint(loaded, p2);
  CHECK(slurp(p1) == slurp(p2));

  for (std::size_t i = 0; i < corpus.patients.size(); ++i) {
    const double after =
        loaded.predict(loaded.prepare(corpus.patients[i])).probability;
    CHECK(after == before[i]);  // exact
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("corrupt checkpoints are rejected with a diagnostic") {
  Corpus corpus = small_corpus(2, 83);
  (void)corpus;
  TempPNet model(small_hp());
  model.init(89);
  const std::string path = "/tmp/tpn_ckpt_trunc.bin";
  save_checkpoint(model, path);
  std::string bytes = slurp(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(path), DataError);

  std::ofstream garbage(path, std::ios::binary | std::ios::trunc);
  garbage << "not a checkpoint";
  garbage.close();
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  std::remove(path.c_str());
}
