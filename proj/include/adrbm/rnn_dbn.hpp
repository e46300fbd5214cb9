#pragma once

#include <span>
#include <vector>

#include "adrbm/dbn.hpp"
#include "adrbm/rnn_rbm.hpp"

namespace adrbm {

/// Stack of RNN-RBMs; layer l is trained on the deterministic hidden
/// sequences of layer l-1.
struct RnnDbn {
  std::vector<RnnRbm> layers;
  std::vector<LayerTotals> layer_stats;

  [[nodiscard]] std::size_t depth() const { return layers.size(); }
  void check_chain() const;
};

/// Input sequences of layer `n_layers` (0 returns the data unchanged).
std::vector<Matrix> propagate_sequences(const RnnDbn& dbn, std::span<const Matrix> sequences,
                                        std::size_t n_layers);

/// New top layer: I = J = K = parent J; b and c copy the parent's c; every
/// weight matrix N(0, 0.01^2); u0 uniform in (0, 1).
RnnRbm inherit_rnn_layer(const RnnRbm& parent, RngStream& rng);

/// Row t predicts frame t of `sequence` from frames 0..t-1: layers below the
/// top feed their deterministic hidden sequences upward, the top layer
/// predicts its next input, and one mean-field pass per layer maps the
/// prediction back down using each layer's own time-dependent visible bias.
Matrix predict_sequence_deep(const RnnDbn& model, const Matrix& sequence);

/// Marginals for the frame after `prefix`.
Vector predict_next_deep(const RnnDbn& model, const Matrix& prefix);

PredictionMetrics evaluate_next_frame_deep(const RnnDbn& model,
                                           std::span<const Matrix> sequences);

struct RnnDbnTrainer {
  RnnDbn dbn;            ///< completed layers
  RnnRbmTrainer current; ///< layer being trained (index dbn.depth())
  bool done = false;

  static RnnDbnTrainer start(Index n_visible, const TrainConfig& cfg, const RngStream& root);

  LogRow step(std::span<const Matrix> sequences, const TrainConfig& cfg, const RngStream& root);

  [[nodiscard]] RnnDbn snapshot() const;

private:
  std::vector<Matrix> layer_input_;
  std::size_t layer_input_depth_ = static_cast<std::size_t>(-1);
};

struct RnnDbnResult {
  RnnDbn model;
  TrainLog log;
};

RnnDbnResult train_adaptive_rnn_dbn(std::span<const Matrix> sequences, const TrainConfig& cfg,
                                    const RngStream& root);

} // namespace adrbm
