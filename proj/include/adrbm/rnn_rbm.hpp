#pragma once

#include <span>
#include <vector>

#include "adrbm/adapt.hpp"
#include "adrbm/metrics.hpp"
#include "adrbm/rbm.hpp"
#include "adrbm/train_config.hpp"
#include "adrbm/train_log.hpp"

namespace adrbm {

/// Largest I + J accepted by sequence_cost_exact.
inline constexpr Index kMaxSequenceEnumerationUnits = 20;

/// Mean-field passes used for next-frame marginals.
inline constexpr int kMeanFieldPasses = 10;

/// RBM whose biases at step t are affine in a recurrent state u^(t-1):
///   b_t = b + W_uv u_{t-1},  c_t = c + W_uh u_{t-1},
///   u_t = sigmoid(u + W_uu u_{t-1} + W_vu v_t).
struct RnnRbm {
  Rbm base;      ///< b (I), c (J), W (I x J)
  Vector u_bias; ///< K
  Matrix W_uv;   ///< I x K
  Matrix W_uh;   ///< J x K
  Matrix W_vu;   ///< K x I
  Matrix W_uu;   ///< K x K
  Vector u0;     ///< initial state, entries in (0, 1)

  [[nodiscard]] Index n_visible() const { return base.n_visible(); }
  [[nodiscard]] Index n_hidden() const { return base.n_hidden(); }
  [[nodiscard]] Index state_dim() const { return u_bias.size(); }

  /// Zero parameters with u0 = 0.5.
  static RnnRbm zeros(Index n_visible, Index n_hidden, Index state_dim);
  /// Biases zero, every weight matrix N(0, 0.01^2), u0 uniform in (0, 1).
  static RnnRbm initialized(Index n_visible, Index n_hidden, Index state_dim,
                            RngStream& rng);

  void check_dims() const;
  [[nodiscard]] bool finite() const;
};

/// Gradient over every learned group, including u0.
struct RnnRbmGradient {
  Vector db;
  Vector dc;
  Matrix dW;
  Vector du;
  Matrix dW_uv;
  Matrix dW_uh;
  Matrix dW_vu;
  Matrix dW_uu;
  Vector du0;

  static RnnRbmGradient zeros(const RnnRbm& shape);
  RnnRbmGradient& operator+=(const RnnRbmGradient& other);
  RnnRbmGradient& operator*=(double s);
  [[nodiscard]] double squared_norm() const;
};

void apply_update(RnnRbm& model, const RnnRbmGradient& g, double scale);
void clip_gradient(RnnRbmGradient& g, double max_norm);

struct TemporalBiases {
  Vector b;
  Vector c;
};

TemporalBiases temporal_biases(const RnnRbm& model, const Vector& u_prev);
Vector state_update(const RnnRbm& model, const Vector& u_prev, const Vector& v);

/// Forward pass over a T x I sequence. Row t of `b` and `c` holds the biases
/// for frame t (computed from u row t); `u` has T + 1 rows starting at u0.
struct Unrolled {
  Matrix u;
  Matrix b;
  Matrix c;
};

Unrolled unroll(const RnnRbm& model, const Matrix& sequence);

/// The static RBM seen by one frame.
Rbm frame_rbm(const RnnRbm& model, const Vector& b_t, const Vector& c_t);

/// -sum_t log p(v_t | b_t, c_t, W), marginalising h exactly.
double sequence_cost_exact(const RnnRbm& model, const Matrix& sequence);

/// Gradient of sequence_cost_exact (descent direction), through the full
/// recurrence.
RnnRbmGradient sequence_cost_gradient_exact(const RnnRbm& model, const Matrix& sequence);

/// CD-k per frame, chained back through the recurrence. Ascent direction,
/// summed over sequences and divided by the total frame count. Sequence s
/// draws from rng.split(s).
RnnRbmGradient bptt_gradients(const RnnRbm& model, std::span<const Matrix> batch,
                              const CdConfig& cfg, const RngStream& rng);

/// Visible marginals of the RBM (W, b, c) from kMeanFieldPasses alternating
/// conditional passes starting at 0.5.
Vector mean_field_visible(const Matrix& W, const Vector& b, const Vector& c);

/// Marginals for the frame following `prefix` (t x I, t may be 0).
Vector predict_next(const RnnRbm& model, const Matrix& prefix);

/// Row t is the prediction for frame t from frames 0..t-1.
Matrix predict_sequence(const RnnRbm& model, const Matrix& sequence);

/// Row t is sigmoid(c_t + v_t W): the deterministic hidden representation
/// used as the next layer's input.
Matrix deterministic_hidden_sequence(const RnnRbm& model, const Matrix& sequence);

/// Next-frame metrics over frames 2..T of every sequence.
PredictionMetrics evaluate_next_frame(const RnnRbm& model, std::span<const Matrix> sequences);

/// Mean over all frames of E(v_t, p(h|v_t)) under the frame's biases.
double mean_sequence_energy(const RnnRbm& model, std::span<const Matrix> sequences);

// Hidden-layer editing: W_uh rows follow the hidden axis, K is fixed.
Index hidden_count(const RnnRbm& model);
/// The new W_uh row is drawn from N(0, 0.01^2).
void insert_hidden_copy(RnnRbm& model, Index parent, double noise_sd, RngStream& rng);
void remove_hidden(RnnRbm& model, const std::vector<bool>& keep);

struct RnnRbmTrainer {
  RnnRbm model;
  GradientStats stats;
  AdaptPhase phase;
  int epoch = 0;

  static RnnRbmTrainer start(RnnRbm model, const TrainConfig& cfg);
};

LogRow train_rnn_rbm_epoch(RnnRbmTrainer& trainer, std::span<const Matrix> sequences,
                           const TrainConfig& cfg, const RngStream& layer_rng, int layer,
                           Index n_layers);

struct RnnRbmResult {
  RnnRbm model;
  TrainLog log;
};

/// Fresh model for a run: K = cfg.state_dim or J.
RnnRbm initial_rnn_rbm(Index n_visible, const TrainConfig& cfg, RngStream& rng);

RnnRbmResult train_adaptive_rnn_rbm(std::span<const Matrix> sequences, const TrainConfig& cfg,
                                    const RngStream& root);

} // namespace adrbm
