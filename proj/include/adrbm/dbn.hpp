#pragma once

#include <span>
#include <vector>

#include "adrbm/adapt.hpp"
#include "adrbm/rbm.hpp"
#include "adrbm/train_config.hpp"
#include "adrbm/train_log.hpp"

namespace adrbm {

/// Per-layer quantities compared against the layer-generation thresholds.
struct LayerTotals {
  double wd = 0.0;     ///< summed gradient variance of c and W
  double energy = 0.0; ///< mean energy of the layer's training data
};

/// WD = sum_j var(dc_j) + sum_ij var(dW_ij); E = mean_n E(v_n, p(h|v_n)).
/// Throws Error if the statistics have never been updated.
LayerTotals layer_totals(const GradientStats& stats, const Rbm& rbm, const Matrix& data);

/// sum_l alpha_WD WD^l > theta_L1 and sum_l alpha_E |E^l| > theta_L2, with
/// room for another layer. Energy enters by magnitude: a well-fit layer has
/// negative energy on its data, and "still large" refers to its size.
bool layer_generation_condition(std::span<const LayerTotals> totals,
                                const LayerGenConfig& cfg);

struct Dbn {
  std::vector<Rbm> layers;
  std::vector<LayerTotals> layer_stats;

  [[nodiscard]] std::size_t depth() const { return layers.size(); }
  /// Throws DimensionError unless layer l's I equals layer l-1's J.
  void check_chain() const;
};

bool should_generate_layer(const Dbn& dbn, const LayerGenConfig& cfg);

/// New top layer: I = J = parent J, b and c copied from the parent's c,
/// W ~ N(0, 0.01^2).
Rbm inherit_layer(const Rbm& parent, RngStream& rng);

/// Appends an inherited layer above the current top. Throws CapacityError
/// when the DBN already has max_layers layers.
void generate_layer(Dbn& dbn, const LayerGenConfig& cfg, RngStream& rng);

/// Data pushed through the first `n_layers` layers as probabilities.
Matrix propagate_up(const Dbn& dbn, const Matrix& data, std::size_t n_layers);
Matrix propagate_up(const Dbn& dbn, const Matrix& data);

/// Scales g so its L2 norm is at most max_norm (no-op when max_norm <= 0).
void clip_gradient(RbmGradient& g, double max_norm);

/// Training state of one static RBM layer. `epoch` counts completed epochs.
struct RbmTrainer {
  Rbm model;
  GradientStats stats;
  AdaptPhase phase;
  int epoch = 0;

  static RbmTrainer start(Rbm model, const TrainConfig& cfg);
};

/// One epoch of mini-batch CD with the adaptive schedule. `layer_rng` is the
/// stream for this layer; per-epoch streams are split from it by epoch.
LogRow train_rbm_epoch(RbmTrainer& trainer, const Matrix& data, const TrainConfig& cfg,
                       const RngStream& layer_rng, int layer, Index n_layers);

/// Greedy adaptive DBN training as a resumable state machine.
struct DbnTrainer {
  Dbn dbn;           ///< completed layers
  RbmTrainer current; ///< layer being trained (index dbn.depth())
  bool done = false;

  static DbnTrainer start(Index n_visible, const TrainConfig& cfg, const RngStream& root);

  /// Runs one epoch of the current layer, then the layer-generation decision
  /// if the layer is complete.
  LogRow step(const Matrix& data, const TrainConfig& cfg, const RngStream& root);

  /// Completed layers plus the one in training.
  [[nodiscard]] Dbn snapshot() const;

private:
  Matrix layer_input_;
  std::size_t layer_input_depth_ = static_cast<std::size_t>(-1);
};

/// Stream used by layer `layer` of a run rooted at `root`.
RngStream layer_stream(const RngStream& root, std::size_t layer);

struct DbnResult {
  Dbn dbn;
  TrainLog log;
};

DbnResult train_adaptive_dbn(const Matrix& data, const TrainConfig& cfg, const RngStream& root);

} // namespace adrbm
