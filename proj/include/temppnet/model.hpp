#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "temppnet/autodiff.hpp"
#include "temppnet/encoder.hpp"
#include "temppnet/metrics.hpp"
#include "temppnet/optim.hpp"
#include "temppnet/prototype.hpp"
#include "temppnet/sensor.hpp"

// The full classifier: encoder, symptom prototypes, trend prototypes with
// latent start times, the training objective with both regularizers, the
// training loop, ablation variants, and checkpointing.

namespace temppnet {

enum class Ablation { kNone, kNoStartTime, kLastSeverity, kAvgSeverity };

Ablation ablation_from_string(const std::string& name);
std::string to_string(Ablation a);

struct HyperParams {
  int embed_dim = 128;   // n_e
  int time_dim = 64;     // n_d
  int num_symptoms = 8;  // M
  int k_per_class = 5;   // K
  double lambda_s = 0.1;
  double lambda_t = 0.1;
  double learning_rate = 0.001;
  int batch_size = 32;
  double horizon_days = 5.0;  // n_w
  double window_days = 14.0;  // n_T
  double gamma = -1e-4;
  int rate_hz = 10;
};

class TempPNet {
 public:
  explicit TempPNet(const HyperParams& hp = HyperParams(),
                    Ablation ablation = Ablation::kNone);

  void init(std::uint64_t seed);

  const HyperParams& hyperparams() const { return hp_; }
  Ablation ablation() const { return ablation_; }

  // Every learnable array exactly once, in a stable order.
  std::vector<ad::Param*> parameters();

  // A patient resampled to the model rate and shaped to 3x300 segments.
  struct Prepared {
    std::string id;
    int label = 0;
    std::vector<double> times;                             // first at 0
    std::vector<std::array<std::vector<double>, 3>> segs;  // per test
  };
  Prepared prepare(const PatientRecord& rec) const;

  struct Evidence {
    double probability = 0.5;
    std::vector<double> trend_strengths;            // 2K (empty for severity variants)
    std::vector<double> start_times;                // 2K
    std::vector<std::vector<double>> severities;    // N columns of M
    std::vector<std::vector<double>> patch_scores;  // N entries of M*n_o
  };

  // Eval-mode forward pass with per-prototype evidence.
  Evidence predict(const Prepared& patient);

  // Mean NLL over the batch plus both regularizers, computed per patient
  // and combined with batch-composition weights. When do_backward is set
  // the gradients of the full objective land in the parameters. Patients
  // run on worker threads; gradients and batchnorm statistics are applied
  // in patient order, so results do not depend on scheduling.
  double batch_loss(const std::vector<const Prepared*>& batch, bool training,
                    bool do_backward, int threads = 1);

  Encoder& encoder() { return encoder_; }
  SymptomPrototypes& symptoms() { return symptoms_; }
  TimeEncoding& trend_time() { return trend_time_; }
  TrendPrototypes& trends() { return trends_; }
  StartTimeNet& t0_net() { return t0_net_; }

  struct Snapshot {
    std::vector<std::vector<double>> values;
    std::vector<ad::BatchNormStats> running;
  };
  Snapshot snapshot();
  void restore(const Snapshot& s);

 private:
  struct PatientOutputs;
  PatientOutputs forward_patient(ad::Graph& g, const Prepared& p, bool training,
                                 Evidence* evidence);

  HyperParams hp_;
  Ablation ablation_;
  Encoder encoder_;
  SymptomPrototypes symptoms_;
  TimeEncoding trend_time_;
  TrendPrototypes trends_;
  StartTimeNet t0_net_;
  ad::Param severity_readout_w_;  // severity-only variants
  ad::Param severity_readout_b_;
};

// Eq.-style regularizer values over per-patient summaries; class terms
// with no patients contribute 0.
double symptom_regularizer(const std::vector<std::vector<double>>& avg_severities,
                           const std::vector<int>& labels);
double trend_regularizer(const std::vector<std::vector<double>>& strengths,
                         const std::vector<int>& labels, int k_per_class);

struct TrainConfig {
  int epochs = 50;
  std::uint64_t seed = 7;
  Ablation ablation = Ablation::kNone;
  int patience = 10;
  double train_frac = 0.6;
  double val_frac = 0.2;
  bool augment = true;
  int threads = 0;  // 0 = hardware concurrency
};

struct EpochStats {
  double train_loss = 0;
  MetricsRow val;
};

struct TrainResult {
  std::vector<EpochStats> history;
  MetricsRow val_metrics;   // at the retained checkpoint
  MetricsRow test_metrics;  // at the retained checkpoint
  int best_epoch = -1;
  std::vector<std::string> train_ids, val_ids, test_ids;
};

// Stratified patient-level split of the corpus indices, seeded shuffle.
struct Split {
  std::vector<int> train, val, test;
};
Split stratified_split(const std::vector<int>& labels, double train_frac,
                       double val_frac, std::uint64_t seed);

TrainResult train(TempPNet& model, const Corpus& corpus, const TrainConfig& cfg);

// Eval-mode probabilities for a set of prepared patients.
std::vector<double> predict_probabilities(TempPNet& model,
                                          const std::vector<TempPNet::Prepared>& xs,
                                          int threads = 0);

void save_checkpoint(TempPNet& model, const std::string& path);
TempPNet load_checkpoint(const std::string& path);

}  // namespace temppnet
