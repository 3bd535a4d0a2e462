#pragma once

#include <random>
#include <string>
#include <vector>

#include "temppnet/autodiff.hpp"

// Symptom prototypes and severities, Fourier time encoding, trend
// prototypes, the logistic-normal likelihood behind trend existing
// strength, and the GRU inference net for the latent trend start time.

namespace temppnet {

struct SymptomPrototypes {
  ad::Param embeddings;   // [M, n_e]
  double gamma = -1e-4;   // strictly negative

  SymptomPrototypes(int m, int n_e)
      : embeddings("symptom.embeddings", {m, n_e}) {}
  int count() const { return embeddings.shape[0]; }
  void init(std::mt19937_64& rng, double scale = 0.1);
};

struct SymptomScores {
  ad::Value patch_scores;  // [M, n_o], each in (0,1)
  ad::Value severities;    // [M], max over patches
};

// patch score exp(gamma - ||H_o - p_m||^2); severity is the patch max.
SymptomScores symptom_scores(ad::Graph& g, ad::Value prototype_leaf, double gamma,
                             ad::Value features);

// Unit-norm Fourier features of a time scalar:
// sqrt(1/n_d) [cos(w t + th)..., sin(w t + th)...].
struct TimeEncoding {
  ad::Param omega;  // [n_d]
  ad::Param theta;  // [n_d]

  TimeEncoding(const std::string& prefix, int n_d)
      : omega(prefix + ".omega", {n_d}), theta(prefix + ".theta", {n_d}) {}
  int dim() const { return omega.shape[0]; }

  // omega on a log-spaced grid of periods (default 12 hours .. 4 weeks),
  // theta uniform in [0, 2*pi).
  void init(std::mt19937_64& rng, double min_period_days = 0.5,
            double max_period_days = 28.0);

  ad::Value encode(ad::Graph& g, ad::Value t);
  ad::Value encode(ad::Graph& g, double t);
};

// 2K trend prototypes; the first K belong to the depression class.
struct TrendPrototypes {
  std::vector<ad::Param> coeff;  // each [M, 2*n_d]
  int k_per_class;

  TrendPrototypes(int k_per_class, int m, int n_d);
  int total() const { return 2 * k_per_class; }
  bool is_depression(int k) const { return k < k_per_class; }
  void init(std::mt19937_64& rng, double scale = 0.1);
};

// Pre-sigmoid trajectory value of prototype k at time t (an M-vector).
ad::Value trend_logit(ad::Graph& g, ad::Param& coeff_k, TimeEncoding& enc, ad::Value t);

// Log density of the M-dimensional logistic-normal with identity
// covariance, evaluated in log space.
double logistic_normal_logpdf(const std::vector<double>& z,
                              const std::vector<double>& mu);
ad::Value logistic_normal_logpdf(ad::Graph& g, ad::Value z, ad::Value mu);

// GRU over severity columns concatenated with a separately-parameterized
// time encoding; per-prototype readouts map the last hidden state to a
// start time in (-horizon, 0).
struct StartTimeNet {
  ad::Param w_reset, w_update, w_cand;    // [hidden, M + 2*n_d]
  ad::Param u_reset, u_update, u_cand;    // [hidden, hidden]
  ad::Param b_reset, b_update, b_cand_in, b_cand_hid;
  std::vector<ad::Param> readout;         // per prototype, [hidden]
  TimeEncoding time_enc;
  double horizon_days;                    // n_w

  StartTimeNet(int m, int n_d, int hidden, int num_prototypes,
               double horizon_days = 5.0);
  void init(std::mt19937_64& rng);

  // Consumes S_i + Phi(t_i) in time order and returns the last hidden state.
  ad::Value summary(ad::Graph& g, const std::vector<ad::Value>& severity_cols,
                    const std::vector<double>& timepoints);
  // t0 = -horizon * sigmoid(w_k . h_last), strictly inside (-horizon, 0).
  ad::Value start_time(ad::Graph& g, ad::Value h_last, int k);

  std::vector<ad::Param*> parameters();
};

// Everything shared across prototypes when scoring one patient.
struct TrendStrengthInputs {
  std::vector<ad::Value> severity_logits;  // logit of each clamped column S_i
  ad::Value barrier_total;                 // sum_i sum_m log 1/(S(1-S))
  std::vector<double> timepoints;          // t_i, first at 0
  int m = 0;                               // M
};

// Existing strength of trend prototype k: sigmoid of the log-likelihood of
// the severity columns under the aligned trajectory.
ad::Value trend_strength(ad::Graph& g, const TrendStrengthInputs& in,
                         ad::Param& coeff_k, TimeEncoding& trend_enc, ad::Value t0);

// Generative sampler for the progression matrix under prototype k: aligned
// times, pre-sigmoid means, standard normal noise, sigmoid. Returns columns
// indexed by timepoint. noise_scale 0 reproduces the trajectory exactly.
std::vector<std::vector<double>> sample_progression(
    const ad::Param& coeff_k, const TimeEncoding& enc, double t0,
    const std::vector<double>& timepoints, std::mt19937_64& rng,
    double noise_scale = 1.0);

inline constexpr double kSeverityClampLo = 1e-6;
inline constexpr double kSeverityClampHi = 1.0 - 1e-6;

}  // namespace temppnet
