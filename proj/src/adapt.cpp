#include "adrbm/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace adrbm {

void AdaptConfig::validate() const {
  if (!(alpha_c > 0.0) || !(alpha_W > 0.0)) {
    throw ConfigError("adapt.alpha_c and adapt.alpha_W must be > 0");
  }
  if (!(theta_G > 0.0)) {
    throw ConfigError("adapt.theta_G must be > 0");
  }
  // theta_A = 0 disables annihilation, which the baseline configuration uses.
  if (!(theta_A >= 0.0 && theta_A < 1.0)) {
    throw ConfigError("adapt.theta_A must lie in [0, 1)");
  }
  if (generation_phase_epochs < 0) {
    throw ConfigError("adapt.generation_phase_epochs must be >= 0");
  }
  if (min_hidden < 1 || min_hidden > max_hidden) {
    throw ConfigError("adapt requires 1 <= min_hidden <= max_hidden");
  }
  if (!(split_noise_sd >= 0.0)) {
    throw ConfigError("adapt.split_noise_sd must be >= 0");
  }
  if (!(stats_decay > 0.0 && stats_decay < 1.0)) {
    throw ConfigError("adapt.stats_decay must lie in (0, 1)");
  }
}

int AdaptConfig::generation_epochs(int total_epochs) const {
  return generation_phase_epochs > 0 ? generation_phase_epochs : total_epochs / 2;
}

GradientStats GradientStats::zeros(Index n_visible, Index n_hidden, double decay) {
  return GradientStats{decay,
                       Vector::Zero(n_hidden),
                       Vector::Zero(n_hidden),
                       Matrix::Zero(n_visible, n_hidden),
                       Matrix::Zero(n_visible, n_hidden),
                       Vector::Zero(n_hidden)};
}

namespace {

double corrected_variance(double mean, double sq, double n, double decay) {
  if (n <= 0.0) {
    return 0.0;
  }
  const double correction = 1.0 - std::pow(decay, n);
  const double m = mean / correction;
  const double s = sq / correction;
  return std::max(0.0, s - m * m);
}

} // namespace

double GradientStats::variance_c(Index j) const {
  return corrected_variance(mean_c[j], sq_c[j], count[j], decay);
}

double GradientStats::variance_w(Index i, Index j) const {
  return corrected_variance(mean_W(i, j), sq_W(i, j), count[j], decay);
}

double GradientStats::mean_variance_w(Index j) const {
  if (n_visible() == 0) {
    return 0.0;
  }
  double total = 0.0;
  for (Index i = 0; i < n_visible(); ++i) {
    total += variance_w(i, j);
  }
  return total / static_cast<double>(n_visible());
}

double GradientStats::total_variance_c() const {
  double total = 0.0;
  for (Index j = 0; j < n_hidden(); ++j) {
    total += variance_c(j);
  }
  return total;
}

double GradientStats::total_variance_w() const {
  double total = 0.0;
  for (Index j = 0; j < n_hidden(); ++j) {
    for (Index i = 0; i < n_visible(); ++i) {
      total += variance_w(i, j);
    }
  }
  return total;
}

void GradientStats::insert_hidden(Index pos) {
  const Vector zero_col = Vector::Zero(n_visible());
  mean_c = insert_entry(mean_c, pos, 0.0);
  sq_c = insert_entry(sq_c, pos, 0.0);
  count = insert_entry(count, pos, 0.0);
  mean_W = insert_col(mean_W, pos, zero_col);
  sq_W = insert_col(sq_W, pos, zero_col);
}

void GradientStats::remove_hidden(const std::vector<bool>& keep) {
  mean_c = keep_entries(mean_c, keep);
  sq_c = keep_entries(sq_c, keep);
  count = keep_entries(count, keep);
  mean_W = keep_cols(mean_W, keep);
  sq_W = keep_cols(sq_W, keep);
}

void update_stats(GradientStats& stats, const Vector& dc, const Matrix& dW) {
  if (dc.size() != stats.n_hidden() || dW.cols() != stats.n_hidden()) {
    throw DimensionError("hidden axis mismatch: stats track J=" +
                         std::to_string(stats.n_hidden()) + ", gradient has " +
                         std::to_string(dc.size()));
  }
  if (dW.rows() != stats.n_visible()) {
    throw DimensionError("visible axis mismatch: stats track I=" +
                         std::to_string(stats.n_visible()) + ", gradient has " +
                         std::to_string(dW.rows()));
  }
  const double d = stats.decay;
  stats.mean_c = d * stats.mean_c + (1.0 - d) * dc;
  stats.sq_c = d * stats.sq_c + (1.0 - d) * dc.cwiseAbs2();
  stats.mean_W = d * stats.mean_W + (1.0 - d) * dW;
  stats.sq_W = d * stats.sq_W + (1.0 - d) * dW.cwiseAbs2();
  stats.count.array() += 1.0;
}

double generation_score(const GradientStats& stats, const AdaptConfig& cfg, Index j) {
  if (j < 0 || j >= stats.n_hidden()) {
    throw DimensionError("hidden index " + std::to_string(j) + " out of range for J=" +
                         std::to_string(stats.n_hidden()));
  }
  return (cfg.alpha_c * stats.variance_c(j)) * (cfg.alpha_W * stats.mean_variance_w(j));
}

std::vector<Index> generation_candidates(const GradientStats& stats, const AdaptConfig& cfg) {
  std::vector<Index> out;
  for (Index j = 0; j < stats.n_hidden(); ++j) {
    if (generation_score(stats, cfg, j) > cfg.theta_G) {
      out.push_back(j);
    }
  }
  return out;
}

Index hidden_count(const Rbm& rbm) { return rbm.n_hidden(); }

void insert_hidden_copy(Rbm& rbm, Index parent, double noise_sd, RngStream& rng) {
  if (parent < 0 || parent >= rbm.n_hidden()) {
    throw DimensionError("parent index " + std::to_string(parent) +
                         " out of range for J=" + std::to_string(rbm.n_hidden()));
  }
  double c_new = rbm.c[parent];
  Vector w_new = rbm.W.col(parent);
  if (noise_sd > 0.0) {
    c_new += noise_sd * rng.normal();
    w_new += gaussian_vector(w_new.size(), noise_sd, rng);
  }
  rbm.c = insert_entry(rbm.c, parent + 1, c_new);
  rbm.W = insert_col(rbm.W, parent + 1, w_new);
}

void remove_hidden(Rbm& rbm, const std::vector<bool>& keep) {
  rbm.c = keep_entries(rbm.c, keep);
  rbm.W = keep_cols(rbm.W, keep);
}

std::vector<bool> annihilation_mask_from_means(const Vector& mean_activation,
                                               const AdaptConfig& cfg) {
  const Index J = mean_activation.size();
  std::vector<bool> mask(static_cast<std::size_t>(J), false);
  std::vector<Index> marked;
  for (Index j = 0; j < J; ++j) {
    if (mean_activation[j] < cfg.theta_A) {
      marked.push_back(j);
    }
  }
  const Index removable = std::max<Index>(0, J - cfg.min_hidden);
  if (static_cast<Index>(marked.size()) > removable) {
    // Keep the most active of the marked neurons; ties go to the lower index.
    std::stable_sort(marked.begin(), marked.end(), [&](Index a, Index b) {
      return mean_activation[a] < mean_activation[b];
    });
    marked.resize(static_cast<std::size_t>(removable));
  }
  for (Index j : marked) {
    mask[static_cast<std::size_t>(j)] = true;
  }
  return mask;
}

std::vector<bool> annihilation_mask(const Rbm& rbm, const Matrix& sample,
                                    const AdaptConfig& cfg) {
  if (sample.rows() == 0) {
    throw DataError("annihilation_mask: empty dataset sample");
  }
  const Vector mean = hidden_conditional(rbm, sample).colwise().mean().transpose();
  return annihilation_mask_from_means(mean, cfg);
}

void ForgettingConfig::validate() const {
  for (double eps : {epsilon1, epsilon2, epsilon3}) {
    if (!(eps >= 0.0 && eps <= kMaxForgettingCoefficient)) {
      throw ConfigError("forgetting coefficients must lie in [0, 0.01]");
    }
  }
  if (!(theta_selective > 0.0)) {
    throw ConfigError("forget.theta must be > 0");
  }
  if (forgetting_epochs < 0 || selective_epochs < 0) {
    throw ConfigError("forgetting epoch counts must be >= 0");
  }
}

Matrix selective_mask(const Matrix& W, double theta) {
  return W.unaryExpr([theta](double w) { return std::abs(w) < theta ? w : 0.0; });
}

RbmGradient clarify_gradient(const Matrix& batch, const Matrix& hidden_prob,
                             double epsilon2) {
  if (batch.rows() == 0) {
    throw DataError("clarify_gradient: empty batch");
  }
  // d min(1-h, h)/dh is +1 for h <= 1/2 and -1 above; the kink at 1/2 takes
  // the left branch so the push is maximal there.
  const Matrix slope = hidden_prob.unaryExpr([](double h) {
    const double s = h <= 0.5 ? 1.0 : -1.0;
    return s * h * (1.0 - h);
  });
  const double scale = -epsilon2 / static_cast<double>(batch.rows());
  return RbmGradient{Vector::Zero(batch.cols()), scale * slope.colwise().sum().transpose(),
                     scale * batch.transpose() * slope};
}

RbmGradient forgetting_gradient(const Rbm& rbm, ForgettingMode mode,
                                const ForgettingConfig& cfg, const Matrix& batch) {
  const Index I = rbm.n_visible();
  const Index J = rbm.n_hidden();
  RbmGradient g = RbmGradient::zeros(I, J);
  switch (mode) {
  case ForgettingMode::decay:
    g.dW = -cfg.epsilon1 * rbm.W.unaryExpr([](double w) { return sign0(w); });
    break;
  case ForgettingMode::clarify:
    g = clarify_gradient(batch, hidden_conditional(rbm, batch), cfg.epsilon2);
    break;
  case ForgettingMode::selective: {
    const double theta = cfg.theta_selective;
    g.dW = rbm.W.unaryExpr([&](double w) {
      return std::abs(w) < theta ? 0.0 : -cfg.epsilon3 * sign0(w);
    });
    break;
  }
  }
  return g;
}

double mean_hidden_ambiguity(const Matrix& hidden_prob) {
  if (hidden_prob.size() == 0) {
    return 0.0;
  }
  return hidden_prob.unaryExpr([](double h) { return std::min(h, 1.0 - h); }).mean();
}

EpochPlan plan_epoch(const AdaptPhase& phase, const AdaptConfig& adapt,
                     const ForgettingConfig& forget, int epoch, int total_epochs,
                     bool adaptive) {
  EpochPlan plan;
  if (!adaptive) {
    return plan;
  }
  const int generation_epochs = adapt.generation_epochs(total_epochs);
  if (!phase.generation_done && epoch <= generation_epochs) {
    plan.generation_check = true;
    return plan;
  }
  // A zero-length generation phase ends before the first epoch.
  const int generation_end =
      phase.generation_done ? phase.generation_end_epoch : generation_epochs;
  plan.annihilation_check = true;
  if (epoch > total_epochs - forget.selective_epochs) {
    plan.penalty = PenaltySet::selective_clarify;
  } else if (epoch <= generation_end + forget.forgetting_epochs) {
    plan.penalty = PenaltySet::decay_clarify;
  }
  return plan;
}

void record_generation_outcome(AdaptPhase& phase, const AdaptConfig& adapt, int epoch,
                               int total_epochs, bool triggered) {
  phase.quiet_epochs = triggered ? 0 : phase.quiet_epochs + 1;
  if (phase.quiet_epochs >= kQuietEpochsToComplete ||
      epoch >= adapt.generation_epochs(total_epochs)) {
    phase.generation_done = true;
    phase.generation_end_epoch = epoch;
  }
}

} // namespace adrbm
