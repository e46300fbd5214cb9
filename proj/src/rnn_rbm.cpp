#include "adrbm/rnn_rbm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adrbm/dbn.hpp"
#include "adrbm/errors.hpp"

namespace adrbm {

namespace {

constexpr std::uint64_t kStructureStream = ~std::uint64_t{0};

void expect_frames(const RnnRbm& model, const Matrix& sequence) {
  if (sequence.cols() != model.n_visible()) {
    throw DimensionError("visible axis mismatch: model has I=" +
                         std::to_string(model.n_visible()) + ", sequence frames have " +
                         std::to_string(sequence.cols()));
  }
}

void expect_state(const RnnRbm& model, const Vector& u) {
  if (u.size() != model.state_dim()) {
    throw DimensionError("state axis mismatch: model has K=" +
                         std::to_string(model.state_dim()) + ", state has " +
                         std::to_string(u.size()));
  }
}

// Chains upstream gradients wrt the per-frame biases (rows of gb, gc) back
// through the bias and state recurrences into the recurrent parameters and u0. The frame
// weight gradient dW is left to the caller.
void backprop_recurrence(const RnnRbm& m, const Matrix& sequence, const Unrolled& un,
                         const Matrix& gb, const Matrix& gc, RnnRbmGradient& g) {
  const Index T = sequence.rows();
  Vector carry = Vector::Zero(m.state_dim()); // dC/du_t
  for (Index t = T; t >= 1; --t) {
    const Vector u_t = un.u.row(t).transpose();
    const Vector u_prev = un.u.row(t - 1).transpose();
    const Vector v_t = sequence.row(t - 1).transpose();

    const Vector da = carry.cwiseProduct(u_t.cwiseProduct((1.0 - u_t.array()).matrix()));
    g.du += da;
    g.dW_uu += da * u_prev.transpose();
    g.dW_vu += da * v_t.transpose();
    Vector next_carry = m.W_uu.transpose() * da;

    const Vector gb_t = gb.row(t - 1).transpose();
    const Vector gc_t = gc.row(t - 1).transpose();
    g.db += gb_t;
    g.dc += gc_t;
    g.dW_uv += gb_t * u_prev.transpose();
    g.dW_uh += gc_t * u_prev.transpose();
    next_carry += m.W_uv.transpose() * gb_t + m.W_uh.transpose() * gc_t;
    carry = std::move(next_carry);
  }
  g.du0 += carry;
}

void add_penalties(RnnRbmGradient& g, const RnnRbm& model, PenaltySet penalty,
                   const ForgettingConfig& forget, std::span<const Matrix> batch) {
  if (penalty == PenaltySet::none) {
    return;
  }
  const bool decay = penalty == PenaltySet::decay_clarify;
  const double weight_eps = decay ? forget.epsilon1 : forget.epsilon3;
  if (weight_eps > 0.0) {
    // The weight penalties do not read the batch.
    g.dW += forgetting_gradient(model.base,
                                decay ? ForgettingMode::decay : ForgettingMode::selective,
                                forget, Matrix())
                .dW;
  }
  if (forget.epsilon2 > 0.0) {
    Index frames = 0;
    for (const auto& s : batch) {
      frames += s.rows();
    }
    Matrix v(frames, model.n_visible());
    Matrix h(frames, model.n_hidden());
    Index row = 0;
    for (const auto& s : batch) {
      v.middleRows(row, s.rows()) = s;
      h.middleRows(row, s.rows()) = deterministic_hidden_sequence(model, s);
      row += s.rows();
    }
    const RbmGradient clarify = clarify_gradient(v, h, forget.epsilon2);
    g.dc += clarify.dc;
    g.dW += clarify.dW;
  }
}

} // namespace

RnnRbm RnnRbm::zeros(Index n_visible, Index n_hidden, Index state_dim) {
  return RnnRbm{Rbm::zeros(n_visible, n_hidden),
                Vector::Zero(state_dim),
                Matrix::Zero(n_visible, state_dim),
                Matrix::Zero(n_hidden, state_dim),
                Matrix::Zero(state_dim, n_visible),
                Matrix::Zero(state_dim, state_dim),
                Vector::Constant(state_dim, 0.5)};
}

RnnRbm RnnRbm::initialized(Index n_visible, Index n_hidden, Index state_dim, RngStream& rng) {
  RnnRbm m = zeros(n_visible, n_hidden, state_dim);
  m.base.W = gaussian_matrix(n_visible, n_hidden, 0.01, rng);
  m.W_uv = gaussian_matrix(n_visible, state_dim, 0.01, rng);
  m.W_uh = gaussian_matrix(n_hidden, state_dim, 0.01, rng);
  m.W_vu = gaussian_matrix(state_dim, n_visible, 0.01, rng);
  m.W_uu = gaussian_matrix(state_dim, state_dim, 0.01, rng);
  for (Index k = 0; k < state_dim; ++k) {
    // Open interval: shift away from an exact 0.
    m.u0[k] = (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }
  return m;
}

void RnnRbm::check_dims() const {
  base.check_dims();
  const Index I = n_visible();
  const Index J = n_hidden();
  const Index K = state_dim();
  auto check = [](const Matrix& m, Index rows, Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
      throw DimensionError(std::string(name) + " is " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                           "x" + std::to_string(cols));
    }
  };
  check(W_uv, I, K, "W_uv");
  check(W_uh, J, K, "W_uh");
  check(W_vu, K, I, "W_vu");
  check(W_uu, K, K, "W_uu");
  if (u0.size() != K) {
    throw DimensionError("state axis mismatch: u0 has " + std::to_string(u0.size()) +
                         " entries, K=" + std::to_string(K));
  }
}

bool RnnRbm::finite() const {
  return base.finite() && u_bias.allFinite() && W_uv.allFinite() && W_uh.allFinite() &&
         W_vu.allFinite() && W_uu.allFinite() && u0.allFinite();
}

RnnRbmGradient RnnRbmGradient::zeros(const RnnRbm& shape) {
  const Index I = shape.n_visible();
  const Index J = shape.n_hidden();
  const Index K = shape.state_dim();
  return RnnRbmGradient{Vector::Zero(I),    Vector::Zero(J),    Matrix::Zero(I, J),
                        Vector::Zero(K),    Matrix::Zero(I, K), Matrix::Zero(J, K),
                        Matrix::Zero(K, I), Matrix::Zero(K, K), Vector::Zero(K)};
}

RnnRbmGradient& RnnRbmGradient::operator+=(const RnnRbmGradient& o) {
  db += o.db;
  dc += o.dc;
  dW += o.dW;
  du += o.du;
  dW_uv += o.dW_uv;
  dW_uh += o.dW_uh;
  dW_vu += o.dW_vu;
  dW_uu += o.dW_uu;
  du0 += o.du0;
  return *this;
}

RnnRbmGradient& RnnRbmGradient::operator*=(double s) {
  db *= s;
  dc *= s;
  dW *= s;
  du *= s;
  dW_uv *= s;
  dW_uh *= s;
  dW_vu *= s;
  dW_uu *= s;
  du0 *= s;
  return *this;
}

double RnnRbmGradient::squared_norm() const {
  return db.squaredNorm() + dc.squaredNorm() + dW.squaredNorm() + du.squaredNorm() +
         dW_uv.squaredNorm() + dW_uh.squaredNorm() + dW_vu.squaredNorm() +
         dW_uu.squaredNorm() + du0.squaredNorm();
}

void apply_update(RnnRbm& m, const RnnRbmGradient& g, double scale) {
  m.base.b += scale * g.db;
  m.base.c += scale * g.dc;
  m.base.W += scale * g.dW;
  m.u_bias += scale * g.du;
  m.W_uv += scale * g.dW_uv;
  m.W_uh += scale * g.dW_uh;
  m.W_vu += scale * g.dW_vu;
  m.W_uu += scale * g.dW_uu;
  // u0 stays a valid state.
  m.u0 = (m.u0 + scale * g.du0).cwiseMax(1e-6).cwiseMin(1.0 - 1e-6);
}

void clip_gradient(RnnRbmGradient& g, double max_norm) {
  if (max_norm <= 0.0) {
    return;
  }
  const double norm = std::sqrt(g.squared_norm());
  if (norm > max_norm) {
    g *= max_norm / norm;
  }
}

TemporalBiases temporal_biases(const RnnRbm& model, const Vector& u_prev) {
  expect_state(model, u_prev);
  return TemporalBiases{model.base.b + model.W_uv * u_prev, model.base.c + model.W_uh * u_prev};
}

Vector state_update(const RnnRbm& model, const Vector& u_prev, const Vector& v) {
  expect_state(model, u_prev);
  if (v.size() != model.n_visible()) {
    throw DimensionError("visible axis mismatch: model has I=" +
                         std::to_string(model.n_visible()) + ", frame has " +
                         std::to_string(v.size()));
  }
  return sigmoid(Vector(model.u_bias + model.W_uu * u_prev + model.W_vu * v));
}

Unrolled unroll(const RnnRbm& model, const Matrix& sequence) {
  if (sequence.rows() == 0) {
    throw DataError("unroll: empty sequence");
  }
  expect_frames(model, sequence);
  const Index T = sequence.rows();
  Unrolled un{Matrix(T + 1, model.state_dim()), Matrix(T, model.n_visible()),
              Matrix(T, model.n_hidden())};
  un.u.row(0) = model.u0.transpose();
  for (Index t = 0; t < T; ++t) {
    const Vector u_prev = un.u.row(t).transpose();
    const TemporalBiases tb = temporal_biases(model, u_prev);
    un.b.row(t) = tb.b.transpose();
    un.c.row(t) = tb.c.transpose();
    un.u.row(t + 1) = state_update(model, u_prev, sequence.row(t).transpose()).transpose();
  }
  return un;
}

Rbm frame_rbm(const RnnRbm& model, const Vector& b_t, const Vector& c_t) {
  return Rbm{b_t, c_t, model.base.W};
}

double sequence_cost_exact(const RnnRbm& model, const Matrix& sequence) {
  if (model.n_visible() + model.n_hidden() > kMaxSequenceEnumerationUnits) {
    throw CapacityError("sequence_cost_exact limited to I+J <= " +
                        std::to_string(kMaxSequenceEnumerationUnits));
  }
  if (sequence.rows() == 0) {
    throw DataError("sequence_cost_exact: empty sequence");
  }
  const Unrolled un = unroll(model, sequence);
  double cost = 0.0;
  for (Index t = 0; t < sequence.rows(); ++t) {
    const Rbm frame = frame_rbm(model, un.b.row(t).transpose(), un.c.row(t).transpose());
    cost += free_energy(frame, sequence.row(t).transpose()) + log_partition_exact(frame);
  }
  return cost;
}

RnnRbmGradient sequence_cost_gradient_exact(const RnnRbm& model, const Matrix& sequence) {
  if (model.n_visible() + model.n_hidden() > kMaxSequenceEnumerationUnits) {
    throw CapacityError("sequence_cost_gradient_exact limited to I+J <= " +
                        std::to_string(kMaxSequenceEnumerationUnits));
  }
  if (sequence.rows() == 0) {
    throw DataError("sequence_cost_gradient_exact: empty sequence");
  }
  const Index T = sequence.rows();
  const Unrolled un = unroll(model, sequence);
  Matrix gb(T, model.n_visible());
  Matrix gc(T, model.n_hidden());
  RnnRbmGradient g = RnnRbmGradient::zeros(model);
  for (Index t = 0; t < T; ++t) {
    const Rbm frame = frame_rbm(model, un.b.row(t).transpose(), un.c.row(t).transpose());
    const RbmGradient ascent = log_likelihood_gradient_exact(frame, sequence.row(t));
    gb.row(t) = -ascent.db.transpose();
    gc.row(t) = -ascent.dc.transpose();
    g.dW -= ascent.dW;
  }
  backprop_recurrence(model, sequence, un, gb, gc, g);
  return g;
}

RnnRbmGradient bptt_gradients(const RnnRbm& model, std::span<const Matrix> batch,
                              const CdConfig& cfg, const RngStream& rng) {
  if (batch.empty()) {
    throw DataError("bptt_gradients: empty batch");
  }
  cfg.validate();
  RnnRbmGradient g = RnnRbmGradient::zeros(model);
  Index frames = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Matrix& seq = batch[s];
    if (seq.rows() == 0) {
      throw DataError("bptt_gradients: empty sequence in batch");
    }
    const Unrolled un = unroll(model, seq);
    RngStream seq_rng = rng.split(static_cast<std::uint64_t>(s));
    const CdChain chain = run_cd_chain(model.base.W, un.b, un.c, seq, cfg.k, seq_rng);
    g.dW += chain.v0.transpose() * chain.ph0 - chain.vk.transpose() * chain.phk;
    backprop_recurrence(model, seq, un, chain.v0 - chain.vk, chain.ph0 - chain.phk, g);
    frames += seq.rows();
  }
  g *= 1.0 / static_cast<double>(frames);
  return g;
}

Vector mean_field_visible(const Matrix& W, const Vector& b, const Vector& c) {
  Vector pv = Vector::Constant(b.size(), 0.5);
  for (int pass = 0; pass < kMeanFieldPasses; ++pass) {
    const Vector ph = sigmoid(Vector(c + W.transpose() * pv));
    pv = sigmoid(Vector(b + W * ph));
  }
  return pv;
}

Vector predict_next(const RnnRbm& model, const Matrix& prefix) {
  expect_frames(model, prefix);
  Vector u = model.u0;
  for (Index t = 0; t < prefix.rows(); ++t) {
    u = state_update(model, u, prefix.row(t).transpose());
  }
  const TemporalBiases tb = temporal_biases(model, u);
  return mean_field_visible(model.base.W, tb.b, tb.c);
}

Matrix predict_sequence(const RnnRbm& model, const Matrix& sequence) {
  const Unrolled un = unroll(model, sequence);
  Matrix out(sequence.rows(), sequence.cols());
  for (Index t = 0; t < sequence.rows(); ++t) {
    out.row(t) =
        mean_field_visible(model.base.W, un.b.row(t).transpose(), un.c.row(t).transpose())
            .transpose();
  }
  return out;
}

Matrix deterministic_hidden_sequence(const RnnRbm& model, const Matrix& sequence) {
  const Unrolled un = unroll(model, sequence);
  return sigmoid(Matrix(sequence * model.base.W + un.c));
}

PredictionMetrics evaluate_next_frame(const RnnRbm& model, std::span<const Matrix> sequences) {
  MetricAccumulator acc;
  for (const auto& seq : sequences) {
    acc.add(seq, predict_sequence(model, seq), 1);
  }
  return acc.result();
}

double mean_sequence_energy(const RnnRbm& model, std::span<const Matrix> sequences) {
  double total = 0.0;
  Index frames = 0;
  for (const auto& seq : sequences) {
    const Unrolled un = unroll(model, seq);
    const Matrix ph = sigmoid(Matrix(seq * model.base.W + un.c));
    for (Index t = 0; t < seq.rows(); ++t) {
      total += -un.b.row(t).dot(seq.row(t)) - un.c.row(t).dot(ph.row(t)) -
               seq.row(t).dot(model.base.W * ph.row(t).transpose());
    }
    frames += seq.rows();
  }
  return frames > 0 ? total / static_cast<double>(frames) : 0.0;
}

Index hidden_count(const RnnRbm& model) { return model.n_hidden(); }

void insert_hidden_copy(RnnRbm& model, Index parent, double noise_sd, RngStream& rng) {
  insert_hidden_copy(model.base, parent, noise_sd, rng);
  model.W_uh = insert_row(model.W_uh, parent + 1, gaussian_vector(model.state_dim(), 0.01, rng));
}

void remove_hidden(RnnRbm& model, const std::vector<bool>& keep) {
  remove_hidden(model.base, keep);
  model.W_uh = keep_rows(model.W_uh, keep);
}

RnnRbmTrainer RnnRbmTrainer::start(RnnRbm model, const TrainConfig& cfg) {
  RnnRbmTrainer t;
  t.stats = GradientStats::zeros(model.n_visible(), model.n_hidden(), cfg.adapt.stats_decay);
  t.phase.peak_hidden = model.n_hidden();
  t.model = std::move(model);
  return t;
}

LogRow train_rnn_rbm_epoch(RnnRbmTrainer& trainer, std::span<const Matrix> sequences,
                           const TrainConfig& cfg, const RngStream& layer_rng, int layer,
                           Index n_layers) {
  if (sequences.empty()) {
    throw DataError("train_rnn_rbm_epoch: no training sequences");
  }
  const int epoch = trainer.epoch + 1;
  const EpochPlan plan =
      plan_epoch(trainer.phase, cfg.adapt, cfg.forget, epoch, cfg.epochs, cfg.adaptive);
  const RngStream epoch_rng = layer_rng.split(static_cast<std::uint64_t>(epoch));

  RngStream shuffle_rng = epoch_rng.split(0);
  const std::vector<std::size_t> order = permutation(sequences.size(), shuffle_rng);
  const auto batch_size = static_cast<std::size_t>(cfg.cd.batch_size);

  RnnRbm& model = trainer.model;
  std::uint64_t batch_index = 0;
  std::vector<Matrix> batch;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batch.clear();
    for (std::size_t r = start; r < end; ++r) {
      batch.push_back(sequences[order[r]]);
    }
    RnnRbmGradient g = bptt_gradients(model, batch, cfg.cd, epoch_rng.split(++batch_index));
    update_stats(trainer.stats, g.dc, g.dW);
    add_penalties(g, model, plan.penalty, cfg.forget, batch);
    clip_gradient(g, cfg.clip_norm);
    apply_update(model, g, cfg.cd.learning_rate);
  }

  LogRow row;
  RngStream structure_rng = epoch_rng.split(kStructureStream);
  if (plan.generation_check) {
    row.events = maybe_generate(model, trainer.stats, cfg.adapt, structure_rng);
    record_generation_outcome(trainer.phase, cfg.adapt, epoch, cfg.epochs, !row.events.empty());
  } else if (plan.annihilation_check) {
    Vector total = Vector::Zero(model.n_hidden());
    Index frames = 0;
    for (const auto& seq : sequences) {
      total += deterministic_hidden_sequence(model, seq).colwise().sum().transpose();
      frames += seq.rows();
    }
    const Vector mean_act = total / static_cast<double>(frames);
    const std::vector<bool> mask = annihilation_mask_from_means(mean_act, cfg.adapt);
    row.events = apply_annihilation(model, trainer.stats, mask, mean_act);
  }
  trainer.phase.peak_hidden = std::max(trainer.phase.peak_hidden, model.n_hidden());
  trainer.epoch = epoch;

  if (!model.finite()) {
    throw NumericError("non-finite parameters after epoch " + std::to_string(epoch) +
                       " of layer " + std::to_string(layer));
  }
  model.check_dims();

  row.epoch = epoch;
  row.layer = layer;
  row.energy = mean_sequence_energy(model, sequences);
  row.error = evaluate_next_frame(model, sequences).error;
  row.wd_c = trainer.stats.total_variance_c();
  row.wd_w = trainer.stats.total_variance_w();
  row.n_hidden = model.n_hidden();
  row.n_layers = n_layers;
  return row;
}

RnnRbm initial_rnn_rbm(Index n_visible, const TrainConfig& cfg, RngStream& rng) {
  const Index K = cfg.state_dim > 0 ? cfg.state_dim : cfg.n_hidden;
  return RnnRbm::initialized(n_visible, cfg.n_hidden, K, rng);
}

RnnRbmResult train_adaptive_rnn_rbm(std::span<const Matrix> sequences, const TrainConfig& cfg,
                                    const RngStream& root) {
  cfg.validate();
  if (sequences.empty()) {
    throw DataError("train_adaptive_rnn_rbm: no training sequences");
  }
  const RngStream layer_rng = layer_stream(root, 0);
  RngStream init = layer_rng.split(0);
  RnnRbmTrainer trainer =
      RnnRbmTrainer::start(initial_rnn_rbm(sequences.front().cols(), cfg, init), cfg);
  RnnRbmResult result;
  while (trainer.epoch < cfg.epochs) {
    result.log.rows.push_back(train_rnn_rbm_epoch(trainer, sequences, cfg, layer_rng, 0, 1));
  }
  result.model = std::move(trainer.model);
  return result;
}

} // namespace adrbm
