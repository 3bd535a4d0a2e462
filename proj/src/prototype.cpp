#include "temppnet/prototype.hpp"

#include <cmath>

namespace temppnet {

void SymptomPrototypes::init(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : embeddings.value) v = n(rng);
}

SymptomScores symptom_scores(ad::Graph& g, ad::Value prototype_leaf, double gamma,
                             ad::Value features) {
  ad::Value d = g.pairwise_sqdist(prototype_leaf, features);
  ad::Value scores = g.exp(g.affine(d, -1.0, gamma));
  return SymptomScores{scores, g.max_over_axis(scores, 1)};
}

void TimeEncoding::init(std::mt19937_64& rng, double min_period_days,
                        double max_period_days) {
  const int n_d = dim();
  const double lo = std::log(2.0 * M_PI / max_period_days);
  const double hi = std::log(2.0 * M_PI / min_period_days);
  for (int j = 0; j < n_d; ++j) {
    const double f = n_d > 1 ? static_cast<double>(j) / (n_d - 1) : 0.0;
    omega.value[j] = std::exp(lo + f * (hi - lo));
  }
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  for (double& v : theta.value) v = u(rng);
}

ad::Value TimeEncoding::encode(ad::Graph& g, ad::Value t) {
  return g.time_encode(g.param(omega), g.param(theta), t);
}

ad::Value TimeEncoding::encode(ad::Graph& g, double t) {
  return encode(g, g.scalar_const(t));
}

TrendPrototypes::TrendPrototypes(int k_per_class_, int m, int n_d)
    : k_per_class(k_per_class_) {
  coeff.reserve(2 * k_per_class);
  for (int k = 0; k < 2 * k_per_class; ++k)
    coeff.emplace_back("trend.coeff" + std::to_string(k), ad::Shape{m, 2 * n_d});
}

void TrendPrototypes::init(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (ad::Param& p : coeff)
    for (double& v : p.value) v = n(rng);
}

ad::Value trend_logit(ad::Graph& g, ad::Param& coeff_k, TimeEncoding& enc,
                      ad::Value t) {
  return g.matvec(g.param(coeff_k), enc.encode(g, t));
}

double logistic_normal_logpdf(const std::vector<double>& z,
                              const std::vector<double>& mu) {
  if (z.size() != mu.size())
    throw ad::ShapeError("logistic_normal_logpdf: dimension mismatch");
  const double m = static_cast<double>(z.size());
  double barrier = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(z[i] > 0.0 && z[i] < 1.0))
      throw ad::ShapeError("logistic_normal_logpdf: z outside (0,1)");
    barrier -= std::log(z[i]) + std::log(1.0 - z[i]);
    const double logit = std::log(z[i]) - std::log(1.0 - z[i]);
    quad += (logit - mu[i]) * (logit - mu[i]);
  }
  return barrier - 0.5 * m * std::log(2.0 * M_PI) - 0.5 * quad;
}

ad::Value logistic_normal_logpdf(ad::Graph& g, ad::Value z, ad::Value mu) {
  const double m = static_cast<double>(ad::shape_size(z.shape()));
  ad::Value one_minus = g.affine(z, -1.0, 1.0);
  ad::Value barrier =
      g.affine(g.add(g.sum(g.log(z)), g.sum(g.log(one_minus))), -1.0, 0.0);
  ad::Value logit = g.sub(g.log(z), g.log(one_minus));
  ad::Value quad = g.sum(g.square(g.sub(logit, mu)));
  return g.add(barrier, g.affine(quad, -0.5, -0.5 * m * std::log(2.0 * M_PI)));
}

StartTimeNet::StartTimeNet(int m, int n_d, int hidden, int num_prototypes,
                           double horizon)
    : w_reset("t0.w_reset", {hidden, m + 2 * n_d}),
      w_update("t0.w_update", {hidden, m + 2 * n_d}),
      w_cand("t0.w_cand", {hidden, m + 2 * n_d}),
      u_reset("t0.u_reset", {hidden, hidden}),
      u_update("t0.u_update", {hidden, hidden}),
      u_cand("t0.u_cand", {hidden, hidden}),
      b_reset("t0.b_reset", {hidden}),
      b_update("t0.b_update", {hidden}),
      b_cand_in("t0.b_cand_in", {hidden}),
      b_cand_hid("t0.b_cand_hid", {hidden}),
      time_enc("t0.time", n_d),
      horizon_days(horizon) {
  readout.reserve(num_prototypes);
  for (int k = 0; k < num_prototypes; ++k)
    readout.emplace_back("t0.readout" + std::to_string(k), ad::Shape{hidden});
}

void StartTimeNet::init(std::mt19937_64& rng) {
  const int hidden = u_reset.shape[0];
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (ad::Param* p : {&w_reset, &w_update, &w_cand, &u_reset, &u_update, &u_cand,
                       &b_reset, &b_update, &b_cand_in, &b_cand_hid})
    for (double& v : p->value) v = u(rng);
  for (ad::Param& p : readout)
    for (double& v : p.value) v = u(rng);
  time_enc.init(rng);
}

ad::Value StartTimeNet::summary(ad::Graph& g,
                                const std::vector<ad::Value>& severity_cols,
                                const std::vector<double>& timepoints) {
  if (severity_cols.empty() || severity_cols.size() != timepoints.size())
    throw ad::ShapeError("StartTimeNet: columns and timepoints must align");
  const int hidden = u_reset.shape[0];
  ad::Value h = g.constant({hidden}, std::vector<double>(hidden, 0.0));
  ad::GruWeights w{&w_reset, &w_update, &w_cand,   &u_reset,   &u_update,
                   &u_cand,  &b_reset,  &b_update, &b_cand_in, &b_cand_hid};
  for (std::size_t i = 0; i < severity_cols.size(); ++i) {
    ad::Value x = g.concat({severity_cols[i], time_enc.encode(g, timepoints[i])});
    h = ad::gru_cell(g, h, x, w);
  }
  return h;
}

ad::Value StartTimeNet::start_time(ad::Graph& g, ad::Value h_last, int k) {
  ad::Value gate = g.sigmoid(g.dot(g.param(readout[k]), h_last));
  return g.affine(gate, -horizon_days, 0.0);
}

std::vector<ad::Param*> StartTimeNet::parameters() {
  std::vector<ad::Param*> out = {&w_reset,  &w_update,  &w_cand,     &u_reset,
                                 &u_update, &u_cand,    &b_reset,    &b_update,
                                 &b_cand_in, &b_cand_hid, &time_enc.omega,
                                 &time_enc.theta};
  for (ad::Param& p : readout) out.push_back(&p);
  return out;
}

ad::Value trend_strength(ad::Graph& g, const TrendStrengthInputs& in,
                         ad::Param& coeff_k, TimeEncoding& trend_enc, ad::Value t0) {
  const double n = static_cast<double>(in.severity_logits.size());
  ad::Value quad;
  for (std::size_t i = 0; i < in.severity_logits.size(); ++i) {
    ad::Value aligned_t = g.sub(g.scalar_const(in.timepoints[i]), t0);
    ad::Value mu = trend_logit(g, coeff_k, trend_enc, aligned_t);
    ad::Value term = g.sum(g.square(g.sub(in.severity_logits[i], mu)));
    quad = i == 0 ? term : g.add(quad, term);
  }
  const double c = -0.5 * n * in.m * std::log(2.0 * M_PI);
  ad::Value loglik = g.add(in.barrier_total, g.affine(quad, -0.5, c));
  return g.sigmoid(loglik);
}

std::vector<std::vector<double>> sample_progression(
    const ad::Param& coeff_k, const TimeEncoding& enc, double t0,
    const std::vector<double>& timepoints, std::mt19937_64& rng,
    double noise_scale) {
  const int m = coeff_k.shape[0];
  const int n_d = enc.omega.shape[0];
  const double scale = std::sqrt(1.0 / n_d);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> cols;
  cols.reserve(timepoints.size());
  for (double t : timepoints) {
    const double aligned = t - t0;
    std::vector<double> phi(2 * n_d);
    for (int j = 0; j < n_d; ++j) {
      const double a = enc.omega.value[j] * aligned + enc.theta.value[j];
      phi[j] = scale * std::cos(a);
      phi[n_d + j] = scale * std::sin(a);
    }
    std::vector<double> col(m);
    for (int r = 0; r < m; ++r) {
      double mu = 0;
      for (int j = 0; j < 2 * n_d; ++j) mu += coeff_k.value[r * 2 * n_d + j] * phi[j];
      const double x = mu + noise_scale * gauss(rng);
      col[r] = 1.0 / (1.0 + std::exp(-x));
    }
    cols.push_back(std::move(col));
  }
  return cols;
}

}  // namespace temppnet
