#pragma once

#include <concepts>
#include <vector>

#include "adrbm/errors.hpp"
#include "adrbm/rbm.hpp"
#include "adrbm/train_log.hpp"

namespace adrbm {

struct AdaptConfig {
  double alpha_c = 1.0;
  double alpha_W = 1.0;
  double theta_G = 0.001;
  double theta_A = 0.1;
  /// Epochs during which generation is checked; 0 means half the run.
  int generation_phase_epochs = 0;
  Index min_hidden = 1;
  Index max_hidden = 1000;
  double split_noise_sd = 0.0;
  /// EMA decay for the gradient moment estimates.
  double stats_decay = 0.9;

  void validate() const;
  [[nodiscard]] int generation_epochs(int total_epochs) const;
};

/// Generation is complete after this many consecutive epochs without a trigger.
inline constexpr int kQuietEpochsToComplete = 5;

/// Exponentially decayed first and second moments of the hidden-bias and
/// weight gradients. Counts are kept per hidden neuron so a freshly inserted
/// neuron starts with no history.
struct GradientStats {
  double decay = 0.9;
  Vector mean_c;
  Vector sq_c;
  Matrix mean_W; ///< I x J
  Matrix sq_W;   ///< I x J
  Vector count;  ///< per hidden neuron

  static GradientStats zeros(Index n_visible, Index n_hidden, double decay);

  [[nodiscard]] Index n_visible() const { return mean_W.rows(); }
  [[nodiscard]] Index n_hidden() const { return mean_c.size(); }

  /// Bias-corrected variance of dc_j; zero before the first update.
  [[nodiscard]] double variance_c(Index j) const;
  [[nodiscard]] double variance_w(Index i, Index j) const;
  /// Mean over visible units of var(dW_ij).
  [[nodiscard]] double mean_variance_w(Index j) const;
  [[nodiscard]] double total_variance_c() const;
  [[nodiscard]] double total_variance_w() const;

  void insert_hidden(Index pos);
  void remove_hidden(const std::vector<bool>& keep);
};

/// m <- decay m + (1 - decay) g, s <- decay s + (1 - decay) g^2.
void update_stats(GradientStats& stats, const Vector& dc, const Matrix& dW);

/// (alpha_c var(dc_j)) * (alpha_W mean_i var(dW_ij)).
double generation_score(const GradientStats& stats, const AdaptConfig& cfg, Index j);

// Hidden-layer editing primitives for a plain RBM.
Index hidden_count(const Rbm& rbm);
/// Inserts a copy of neuron `parent` at parent + 1 with Gaussian noise on
/// its bias and weight column.
void insert_hidden_copy(Rbm& rbm, Index parent, double noise_sd, RngStream& rng);
void remove_hidden(Rbm& rbm, const std::vector<bool>& keep);

template <typename Model>
concept HiddenEditable = requires(Model& m, const Model& cm, Index j, double sd,
                                  RngStream& rng, const std::vector<bool>& keep) {
  { hidden_count(cm) } -> std::convertible_to<Index>;
  insert_hidden_copy(m, j, sd, rng);
  remove_hidden(m, keep);
};

/// Indices whose score exceeds theta_G, in ascending order.
std::vector<Index> generation_candidates(const GradientStats& stats, const AdaptConfig& cfg);

/// One generation sweep. Scores are evaluated on the pre-edit structure;
/// insertions stop once max_hidden is reached. Returns one event per new
/// neuron, indexed by the parent's pre-edit position.
template <HiddenEditable Model>
std::vector<StructureEvent> maybe_generate(Model& model, GradientStats& stats,
                                           const AdaptConfig& cfg, RngStream& rng) {
  std::vector<StructureEvent> events;
  const std::vector<Index> parents = generation_candidates(stats, cfg);
  Index inserted = 0;
  for (Index parent : parents) {
    if (hidden_count(model) >= cfg.max_hidden) {
      break;
    }
    const double score = generation_score(stats, cfg, parent + inserted);
    insert_hidden_copy(model, parent + inserted, cfg.split_noise_sd, rng);
    stats.insert_hidden(parent + inserted + 1);
    ++inserted;
    events.push_back({StructureEvent::Kind::generate, parent, score});
  }
  return events;
}

/// Marks neuron j when its mean activation is strictly below theta_A. If
/// that would leave fewer than min_hidden neurons, the most active of the
/// marked neurons are spared.
std::vector<bool> annihilation_mask_from_means(const Vector& mean_activation,
                                               const AdaptConfig& cfg);

/// Mean over the sample rows of p(h_j = 1 | v_n), thresholded as above.
std::vector<bool> annihilation_mask(const Rbm& rbm, const Matrix& sample,
                                    const AdaptConfig& cfg);

/// Removes the masked neurons from the model and the statistics. Returns one
/// event per removed neuron (pre-edit index, score from `scores` if given).
template <HiddenEditable Model>
std::vector<StructureEvent> apply_annihilation(Model& model, GradientStats& stats,
                                               const std::vector<bool>& mask,
                                               const Vector& scores = Vector()) {
  const Index J = hidden_count(model);
  if (static_cast<Index>(mask.size()) != J) {
    throw DimensionError("annihilation mask length " + std::to_string(mask.size()) +
                         " does not match hidden axis J=" + std::to_string(J));
  }
  std::vector<bool> keep(mask.size());
  std::vector<StructureEvent> events;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    keep[j] = !mask[j];
    if (mask[j]) {
      const auto idx = static_cast<Index>(j);
      events.push_back({StructureEvent::Kind::annihilate, idx,
                        scores.size() == J ? scores[idx] : 0.0});
    }
  }
  if (events.size() == mask.size()) {
    throw ConfigError("annihilation would remove every hidden neuron");
  }
  if (events.empty()) {
    return events;
  }
  remove_hidden(model, keep);
  stats.remove_hidden(keep);
  return events;
}

struct ForgettingConfig {
  double epsilon1 = 0.001;
  double epsilon2 = 0.001;
  double epsilon3 = 0.001;
  double theta_selective = 0.1;
  /// Epochs of decay + clarification after generation completes.
  int forgetting_epochs = 0;
  /// Final epochs in which selective forgetting replaces decay.
  int selective_epochs = 0;

  void validate() const;
};

/// Upper bound accepted for every penalty coefficient.
inline constexpr double kMaxForgettingCoefficient = 0.01;

enum class ForgettingMode { decay, clarify, selective };

/// W' of selective forgetting: W_ij where |W_ij| < theta, else 0.
Matrix selective_mask(const Matrix& W, double theta);

/// Ascent-direction contribution of one penalty term, to be added to a CD
/// gradient.
///   decay:     -eps1 sign(W)
///   clarify:   -eps2 d/dtheta mean_n sum_j min(1 - h_nj, h_nj), h = p(h|v)
///   selective: -eps3 sign(W) on entries with |W_ij| >= theta
/// `batch` supplies the visible vectors for the clarify term.
RbmGradient forgetting_gradient(const Rbm& rbm, ForgettingMode mode,
                                const ForgettingConfig& cfg, const Matrix& batch);

/// Clarification term with hidden pre-activations given explicitly, for
/// models whose hidden biases vary per row.
RbmGradient clarify_gradient(const Matrix& batch, const Matrix& hidden_prob,
                             double epsilon2);

/// Mean over rows and hidden units of min(h, 1 - h).
double mean_hidden_ambiguity(const Matrix& hidden_prob);

enum class PenaltySet { none, decay_clarify, selective_clarify };

struct EpochPlan {
  bool generation_check = false;
  bool annihilation_check = false;
  PenaltySet penalty = PenaltySet::none;
};

/// Where an adaptive run is in its generation / annihilation schedule.
struct AdaptPhase {
  bool generation_done = false;
  int quiet_epochs = 0;
  int generation_end_epoch = 0;
  Index peak_hidden = 0;
};

/// Schedule for 1-based epoch `epoch` of `total_epochs`.
EpochPlan plan_epoch(const AdaptPhase& phase, const AdaptConfig& adapt,
                     const ForgettingConfig& forget, int epoch, int total_epochs,
                     bool adaptive);

/// Advances the generation phase after a generation check at `epoch`.
void record_generation_outcome(AdaptPhase& phase, const AdaptConfig& adapt, int epoch,
                               int total_epochs, bool triggered);

} // namespace adrbm
