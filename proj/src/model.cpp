#include "temppnet/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace temppnet {

using ad::Graph;
using ad::Param;
using ad::Value;

Ablation ablation_from_string(const std::string& name) {
  if (name == "none") return Ablation::kNone;
  if (name == "no_t0") return Ablation::kNoStartTime;
  if (name == "last_severity") return Ablation::kLastSeverity;
  if (name == "avg_severity") return Ablation::kAvgSeverity;
  throw DataError("unknown ablation flag '" + name +
                  "' (expected none|no_t0|last_severity|avg_severity)");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoStartTime: return "no_t0";
    case Ablation::kLastSeverity: return "last_severity";
    case Ablation::kAvgSeverity: return "avg_severity";
  }
  return "none";
}

namespace {

// splitmix64, used to derive independent deterministic rng streams
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool uses_trends(Ablation a) {
  return a == Ablation::kNone || a == Ablation::kNoStartTime;
}

}  // namespace

TempPNet::TempPNet(const HyperParams& hp, Ablation ablation)
    : hp_(hp),
      ablation_(ablation),
      encoder_(),
      symptoms_(hp.num_symptoms, hp.embed_dim),
      trend_time_("trend.time", hp.time_dim),
      trends_(hp.k_per_class, hp.num_symptoms, hp.time_dim),
      t0_net_(hp.num_symptoms, hp.time_dim, hp.embed_dim, 2 * hp.k_per_class,
              hp.horizon_days),
      severity_readout_w_("severity_readout.w", {hp.num_symptoms}),
      severity_readout_b_("severity_readout.b", {1}) {
  symptoms_.gamma = hp.gamma;
  if (!(hp.gamma < 0)) throw DataError("gamma must be strictly negative");
}

void TempPNet::init(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x7a11));
  encoder_.init_weights(rng);
  symptoms_.init(rng);
  trend_time_.init(rng);
  trends_.init(rng);
  t0_net_.init(rng);
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& v : severity_readout_w_.value) v = n(rng);
  severity_readout_b_.value[0] = 0.0;
}

std::vector<Param*> TempPNet::parameters() {
  std::vector<Param*> out = encoder_.parameters();
  out.push_back(&symptoms_.embeddings);
  out.push_back(&trend_time_.omega);
  out.push_back(&trend_time_.theta);
  for (Param& p : trends_.coeff) out.push_back(&p);
  for (Param* p : t0_net_.parameters()) out.push_back(p);
  out.push_back(&severity_readout_w_);
  out.push_back(&severity_readout_b_);
  return out;
}

TempPNet::Prepared TempPNet::prepare(const PatientRecord& rec) const {
  if (rec.tests.empty())
    throw DataError("prepare: patient '" + rec.patient_id + "' has no walking tests");
  Prepared p;
  p.id = rec.patient_id;
  p.label = rec.label;
  for (const WalkingTest& t : rec.tests) {
    const int rate = static_cast<int>(t.rate_hz);
    if (std::abs(t.rate_hz - rate) > 1e-9 || rate < hp_.rate_hz)
      throw DataError("prepare: cannot resample " + std::to_string(t.rate_hz) +
                      " Hz to " + std::to_string(hp_.rate_hz) + " Hz");
    std::array<std::vector<double>, 3> segs;
    for (int s = 0; s < 3; ++s)
      segs[s] = shape_segment(resample(t.segments[s], rate, hp_.rate_hz));
    p.segs.push_back(std::move(segs));
    p.times.push_back(t.test_time_days);
  }
  return p;
}

struct TempPNet::PatientOutputs {
  Value prob;
  Value nll;
  Value avg_sev_mean;  // (1/M) sum_m of the per-symptom time averages
  Value rt;            // max wrong-class strength - min right-class strength
  bool has_rt = false;
};

TempPNet::PatientOutputs TempPNet::forward_patient(Graph& g, const Prepared& p,
                                                   bool training, Evidence* evidence) {
  const int n_tests = static_cast<int>(p.segs.size());
  if (n_tests == 0) throw DataError("forward: empty patient");
  const int m = hp_.num_symptoms;
  const int k_total = 2 * hp_.k_per_class;

  Encoder::Leaves enc_lv = encoder_.leaves(g);
  Value sym_leaf = g.param(symptoms_.embeddings);

  std::vector<Value> raw_cols, clamped_cols, logits;
  Value barrier_total, avg_raw;
  for (int i = 0; i < n_tests; ++i) {
    std::array<Value, 3> segs;
    for (int s = 0; s < 3; ++s) segs[s] = g.input({3, 300}, p.segs[i][s].data());
    Value h = encoder_.encode_test(g, enc_lv, segs, training);
    SymptomScores scores = symptom_scores(g, sym_leaf, symptoms_.gamma, h);
    raw_cols.push_back(scores.severities);
    avg_raw = i == 0 ? scores.severities : g.add(avg_raw, scores.severities);

    Value s = g.clamp(scores.severities, kSeverityClampLo, kSeverityClampHi);
    clamped_cols.push_back(s);
    Value one_minus = g.affine(s, -1.0, 1.0);
    Value barrier =
        g.affine(g.add(g.sum(g.log(s)), g.sum(g.log(one_minus))), -1.0, 0.0);
    barrier_total = i == 0 ? barrier : g.add(barrier_total, barrier);
    logits.push_back(g.sub(g.log(s), g.log(one_minus)));

    if (evidence) {
      evidence->severities.push_back(scores.severities.data());
      evidence->patch_scores.push_back(scores.patch_scores.data());
    }
  }
  avg_raw = g.affine(avg_raw, 1.0 / n_tests, 0.0);

  PatientOutputs out;
  out.avg_sev_mean = g.affine(g.sum(avg_raw), 1.0 / m, 0.0);

  if (uses_trends(ablation_)) {
    std::vector<Value> strengths(k_total);
    Value h_last;
    if (ablation_ == Ablation::kNone)
      h_last = t0_net_.summary(g, clamped_cols, p.times);
    TrendStrengthInputs in;
    in.severity_logits = logits;
    in.barrier_total = barrier_total;
    in.timepoints = p.times;
    in.m = m;
    for (int k = 0; k < k_total; ++k) {
      Value t0 = ablation_ == Ablation::kNone ? t0_net_.start_time(g, h_last, k)
                                              : g.scalar_const(0.0);
      strengths[k] = trend_strength(g, in, trends_.coeff[k], trend_time_, t0);
      if (evidence) {
        evidence->trend_strengths.push_back(strengths[k].scalar());
        evidence->start_times.push_back(t0.scalar());
      }
    }
    Value pos = strengths[0], neg = strengths[hp_.k_per_class];
    for (int k = 1; k < hp_.k_per_class; ++k) pos = g.add(pos, strengths[k]);
    for (int k = hp_.k_per_class + 1; k < k_total; ++k) neg = g.add(neg, strengths[k]);
    out.prob = g.sigmoid(g.sub(pos, neg));

    // Eq.-style separation term: strongest wrong-class prototype minus the
    // weakest right-class prototype
    std::vector<Value> right, wrong;
    for (int k = 0; k < k_total; ++k)
      (trends_.is_depression(k) == (p.label == 1) ? right : wrong)
          .push_back(strengths[k]);
    Value wrong_max = g.max_over_axis(g.concat(wrong), 0);
    Value right_min = g.min_over_axis(g.concat(right), 0);
    out.rt = g.sub(wrong_max, right_min);
    out.has_rt = true;
  } else {
    Value feats;
    if (ablation_ == Ablation::kLastSeverity) {
      feats = clamped_cols.back();
    } else {
      feats = clamped_cols[0];
      for (int i = 1; i < n_tests; ++i) feats = g.add(feats, clamped_cols[i]);
      feats = g.affine(feats, 1.0 / n_tests, 0.0);
    }
    Value z = g.add(g.dot(g.param(severity_readout_w_), feats),
                    g.param(severity_readout_b_));
    out.prob = g.sigmoid(z);
  }

  Value p_safe = g.clamp(out.prob, 1e-12, 1.0 - 1e-12);
  out.nll = p.label == 1 ? g.affine(g.log(p_safe), -1.0, 0.0)
                         : g.affine(g.log(g.affine(p_safe, -1.0, 1.0)), -1.0, 0.0);
  if (evidence) evidence->probability = out.prob.scalar();
  return out;
}

TempPNet::Evidence TempPNet::predict(const Prepared& patient) {
  Graph g;
  Evidence ev;
  forward_patient(g, patient, /*training=*/false, &ev);
  return ev;
}

namespace {

struct PatientWork {
  double loss = 0;
  ad::Graph::DeferredGrads grads;
  std::vector<ad::BatchNormObservation> bn_obs;
};

// Worker-parallel map with results consumed in index order by the caller.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int t = std::min(threads, n);
  pool.reserve(t);
  for (int w = 0; w < t; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (std::thread& th : pool) th.join();
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

double TempPNet::batch_loss(const std::vector<const Prepared*>& batch, bool training,
                            bool do_backward, int threads) {
  if (batch.empty()) throw DataError("batch_loss: empty batch");
  const double b = static_cast<double>(batch.size());
  int pos = 0, neg = 0;
  for (const Prepared* p : batch) (p->label == 1 ? pos : neg)++;

  const int n = static_cast<int>(batch.size());
  std::vector<PatientWork> work(n);
  parallel_for(n, resolve_threads(threads), [&](int i) {
    const Prepared& p = *batch[i];
    Graph g;
    g.set_defer_param_grads(true);
    PatientOutputs out = forward_patient(g, p, training, nullptr);
    const int class_count = p.label == 1 ? pos : neg;
    const double ws = hp_.lambda_s * (p.label == 1 ? -1.0 : 1.0) / class_count;
    Value term = g.add(g.affine(out.nll, 1.0 / b, 0.0),
                       g.affine(out.avg_sev_mean, ws, 0.0));
    if (out.has_rt) {
      const double wt = hp_.lambda_t / class_count;
      term = g.add(term, g.affine(out.rt, wt, 0.0));
    }
    work[i].loss = term.scalar();
    if (do_backward) {
      g.backward(term);
      work[i].grads = g.take_deferred_grads();
    }
    if (training) work[i].bn_obs = g.batchnorm_observations();
  });

  // single-threaded, fixed-order application keeps training bit-deterministic
  double total = 0;
  for (int i = 0; i < n; ++i) {
    total += work[i].loss;
    Graph::apply_deferred_grads(work[i].grads);
    if (training) encoder_.fold_batch_stats(work[i].bn_obs);
  }
  return total;
}

double symptom_regularizer(const std::vector<std::vector<double>>& avg_severities,
                           const std::vector<int>& labels) {
  if (avg_severities.size() != labels.size())
    throw DataError("symptom_regularizer: mismatched inputs");
  if (avg_severities.empty()) return 0.0;
  const std::size_t m = avg_severities.front().size();
  double value = 0.0;
  for (std::size_t sym = 0; sym < m; ++sym) {
    double pos_sum = 0, neg_sum = 0;
    int pos_n = 0, neg_n = 0;
    for (std::size_t u = 0; u < labels.size(); ++u) {
      if (labels[u] == 1) {
        pos_sum += avg_severities[u][sym];
        ++pos_n;
      } else {
        neg_sum += avg_severities[u][sym];
        ++neg_n;
      }
    }
    const double neg_mean = neg_n > 0 ? neg_sum / neg_n : 0.0;
    const double pos_mean = pos_n > 0 ? pos_sum / pos_n : 0.0;
    value += (neg_mean - pos_mean) / static_cast<double>(m);
  }
  return value;
}

double trend_regularizer(const std::vector<std::vector<double>>& strengths,
                         const std::vector<int>& labels, int k_per_class) {
  if (strengths.size() != labels.size())
    throw DataError("trend_regularizer: mismatched inputs");
  double pos_term = 0, neg_term = 0;
  int pos_n = 0, neg_n = 0;
  for (std::size_t u = 0; u < labels.size(); ++u) {
    const std::vector<double>& s = strengths[u];
    if (static_cast<int>(s.size()) != 2 * k_per_class)
      throw DataError("trend_regularizer: wrong strength count");
    double dep_max = s[0], dep_min = s[0];
    double non_max = s[k_per_class], non_min = s[k_per_class];
    for (int k = 0; k < k_per_class; ++k) {
      dep_max = std::max(dep_max, s[k]);
      dep_min = std::min(dep_min, s[k]);
      non_max = std::max(non_max, s[k_per_class + k]);
      non_min = std::min(non_min, s[k_per_class + k]);
    }
    if (labels[u] == 1) {
      pos_term += non_max - dep_min;
      ++pos_n;
    } else {
      neg_term += dep_max - non_min;
      ++neg_n;
    }
  }
  double value = 0;
  if (pos_n > 0) value += pos_term / pos_n;
  if (neg_n > 0) value += neg_term / neg_n;
  return value;
}

TempPNet::Snapshot TempPNet::snapshot() {
  Snapshot s;
  for (Param* p : parameters()) s.values.push_back(p->value);
  for (int i = 0; i < Encoder::kBlocks; ++i) s.running.push_back(encoder_.block(i).running);
  return s;
}

void TempPNet::restore(const Snapshot& s) {
  auto params = parameters();
  if (s.values.size() != params.size() ||
      s.running.size() != static_cast<std::size_t>(Encoder::kBlocks))
    throw DataError("restore: snapshot does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s.values[i];
  for (int i = 0; i < Encoder::kBlocks; ++i) encoder_.block(i).running = s.running[i];
}

Split stratified_split(const std::vector<int>& labels, double train_frac,
                       double val_frac, std::uint64_t seed) {
  std::vector<int> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (labels[i] == 1 ? pos : neg).push_back(static_cast<int>(i));
  std::mt19937_64 rng(mix_seed(seed, 0x5117));
  Split split;
  for (std::vector<int>* cls : {&pos, &neg}) {
    std::shuffle(cls->begin(), cls->end(), rng);
    const int n = static_cast<int>(cls->size());
    const int n_train = static_cast<int>(std::lround(train_frac * n));
    const int n_val = static_cast<int>(std::lround(val_frac * n));
    for (int i = 0; i < n; ++i) {
      if (i < n_train)
        split.train.push_back((*cls)[i]);
      else if (i < n_train + n_val)
        split.val.push_back((*cls)[i]);
      else
        split.test.push_back((*cls)[i]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<double> predict_probabilities(TempPNet& model,
                                          const std::vector<TempPNet::Prepared>& xs,
                                          int threads) {
  std::vector<double> probs(xs.size(), 0.0);
  parallel_for(static_cast<int>(xs.size()), resolve_threads(threads),
               [&](int i) { probs[i] = model.predict(xs[i]).probability; });
  return probs;
}

TrainResult train(TempPNet& model, const Corpus& corpus, const TrainConfig& cfg) {
  std::vector<int> labels;
  for (const PatientRecord& r : corpus.patients) labels.push_back(r.label);
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!has_pos || !has_neg) throw DataError("train: corpus must contain both classes");

  const int threads = resolve_threads(cfg.threads);
  Split split = stratified_split(labels, cfg.train_frac, cfg.val_frac, cfg.seed);

  std::vector<TempPNet::Prepared> prepared;
  prepared.reserve(corpus.patients.size());
  for (const PatientRecord& r : corpus.patients) prepared.push_back(model.prepare(r));

  TrainResult result;
  for (int i : split.train) result.train_ids.push_back(prepared[i].id);
  for (int i : split.val) result.val_ids.push_back(prepared[i].id);
  for (int i : split.test) result.test_ids.push_back(prepared[i].id);

  Adam::Options opt;
  opt.lr = model.hyperparams().learning_rate;
  Adam adam(opt);
  for (Param* p : model.parameters()) adam.register_param(*p);

  auto evaluate = [&](const std::vector<int>& idx) {
    if (idx.empty()) return MetricsRow{};
    std::vector<TempPNet::Prepared> xs;
    std::vector<int> ys;
    for (int i : idx) {
      xs.push_back(prepared[i]);
      ys.push_back(prepared[i].label);
    }
    return compute_metrics(predict_probabilities(model, xs, threads), ys);
  };

  TempPNet::Snapshot best = model.snapshot();
  double best_f1 = -1.0;
  int best_epoch = -1;
  int stale = 0;
  const int batch_size = std::max(1, model.hyperparams().batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = split.train;
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 1000003ULL * (epoch + 1)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    // one fresh rotation per walking test per epoch
    std::vector<TempPNet::Prepared> augmented(order.size());
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      augmented[oi] = prepared[order[oi]];
      if (!cfg.augment) continue;
      std::mt19937_64 aug_rng(
          mix_seed(cfg.seed, 0xA06ULL + 7919ULL * (epoch + 1) + order[oi]));
      for (auto& segs : augmented[oi].segs) {
        const Mat3 r = quaternion_to_rotation(sample_random_quaternion(aug_rng));
        for (auto& seg : segs) rotate_shaped(seg, r);
      }
    }

    double loss_sum = 0;
    int batches = 0;
    for (std::size_t start = 0; start < augmented.size(); start += batch_size) {
      const std::size_t end = std::min(augmented.size(), start + batch_size);
      std::vector<const TempPNet::Prepared*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&augmented[i]);
      loss_sum += model.batch_loss(batch, /*training=*/true, /*do_backward=*/true,
                                   threads);
      adam.step();
      ++batches;
    }

    EpochStats stats;
    stats.train_loss = batches > 0 ? loss_sum / batches : 0.0;
    stats.val = evaluate(split.val);
    result.history.push_back(stats);

    if (stats.val.f1 > best_f1) {
      best_f1 = stats.val.f1;
      best_epoch = epoch;
      best = model.snapshot();
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }

  model.restore(best);
  result.best_epoch = best_epoch;
  result.val_metrics = evaluate(split.val);
  result.test_metrics = evaluate(split.test);
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, version, JSON header (hyperparameters + array table),
// then raw little-endian doubles in table order.

namespace {

constexpr char kMagic[8] = {'T', 'P', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

using nlohmann::json;

json hyperparams_to_json(const HyperParams& hp) {
  return json{{"embed_dim", hp.embed_dim},
              {"time_dim", hp.time_dim},
              {"num_symptoms", hp.num_symptoms},
              {"k_per_class", hp.k_per_class},
              {"lambda_s", hp.lambda_s},
              {"lambda_t", hp.lambda_t},
              {"learning_rate", hp.learning_rate},
              {"batch_size", hp.batch_size},
              {"horizon_days", hp.horizon_days},
              {"window_days", hp.window_days},
              {"gamma", hp.gamma},
              {"rate_hz", hp.rate_hz}};
}

HyperParams hyperparams_from_json(const json& j) {
  HyperParams hp;
  hp.embed_dim = j.at("embed_dim").get<int>();
  hp.time_dim = j.at("time_dim").get<int>();
  hp.num_symptoms = j.at("num_symptoms").get<int>();
  hp.k_per_class = j.at("k_per_class").get<int>();
  hp.lambda_s = j.at("lambda_s").get<double>();
  hp.lambda_t = j.at("lambda_t").get<double>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.batch_size = j.at("batch_size").get<int>();
  hp.horizon_days = j.at("horizon_days").get<double>();
  hp.window_days = j.at("window_days").get<double>();
  hp.gamma = j.at("gamma").get<double>();
  hp.rate_hz = j.at("rate_hz").get<int>();
  return hp;
}

// named arrays in checkpoint order: parameters, then running statistics
struct ArrayRef {
  std::string name;
  std::vector<double>* data;
};

std::vector<ArrayRef> checkpoint_arrays(TempPNet& model) {
  std::vector<ArrayRef> arrays;
  for (Param* p : model.parameters()) arrays.push_back({p->name, &p->value});
  for (int i = 0; i < Encoder::kBlocks; ++i) {
    auto& rs = model.encoder().block(i).running;
    const std::string tag = "encoder.block" + std::to_string(i);
    arrays.push_back({tag + ".running_mean", &rs.mean});
    arrays.push_back({tag + ".running_var", &rs.var});
  }
  return arrays;
}

}  // namespace

void save_checkpoint(TempPNet& model, const std::string& path) {
  std::vector<ArrayRef> arrays = checkpoint_arrays(model);
  json header;
  header["format_version"] = kFormatVersion;
  header["ablation"] = to_string(model.ablation());
  header["hyperparams"] = hyperparams_to_json(model.hyperparams());
  json table = json::array();
  for (const ArrayRef& a : arrays)
    table.push_back({{"name", a.name}, {"len", a.data->size()}});
  header["arrays"] = table;
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("save_checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t head_len = head.size();
  out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const ArrayRef& a : arrays)
    out.write(reinterpret_cast<const char*>(a.data->data()),
              static_cast<std::streamsize>(a.data->size() * sizeof(double)));
  if (!out) throw DataError("save_checkpoint: write failed for " + path);
}

TempPNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);
  char magic[sizeof(kMagic)];
  std::uint32_t version = 0;
  std::uint64_t head_len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("load_checkpoint: not a checkpoint file: " + path);
  if (version != kFormatVersion)
    throw DataError("load_checkpoint: unsupported format version " +
                    std::to_string(version));
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!in) throw DataError("load_checkpoint: truncated header in " + path);

  json header;
  try {
    header = json::parse(head);
  } catch (const json::exception& e) {
    throw DataError(std::string("load_checkpoint: corrupt header: ") + e.what());
  }
  TempPNet model(hyperparams_from_json(header.at("hyperparams")),
                 ablation_from_string(header.at("ablation").get<std::string>()));
  std::vector<ArrayRef> arrays = checkpoint_arrays(model);
  const json& table = header.at("arrays");
  if (table.size() != arrays.size())
    throw DataError("load_checkpoint: array table does not match the model");
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    if (table[i].at("name").get<std::string>() != arrays[i].name ||
        table[i].at("len").get<std::size_t>() != arrays[i].data->size())
      throw DataError("load_checkpoint: mismatched array '" + arrays[i].name + "'");
    in.read(reinterpret_cast<char*>(arrays[i].data->data()),
            static_cast<std::streamsize>(arrays[i].data->size() * sizeof(double)));
    if (!in)
      throw DataError("load_checkpoint: truncated data for array '" +
                      arrays[i].name + "'");
  }
  char extra;
  if (in.read(&extra, 1))
    throw DataError("load_checkpoint: trailing bytes in " + path);
  return model;
}

}  // namespace temppnet
