#include "adrbm/rnn_dbn.hpp"

#include <string>

#include "adrbm/errors.hpp"

namespace adrbm {

void RnnDbn::check_chain() const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].check_dims();
    if (l > 0 && layers[l].n_visible() != layers[l - 1].n_hidden()) {
      throw DimensionError("layer chain broken: layer " + std::to_string(l) + " has I=" +
                           std::to_string(layers[l].n_visible()) + " but layer " +
                           std::to_string(l - 1) + " has J=" +
                           std::to_string(layers[l - 1].n_hidden()));
    }
  }
}

std::vector<Matrix> propagate_sequences(const RnnDbn& dbn, std::span<const Matrix> sequences,
                                        std::size_t n_layers) {
  std::vector<Matrix> out(sequences.begin(), sequences.end());
  for (std::size_t l = 0; l < n_layers && l < dbn.layers.size(); ++l) {
    for (auto& seq : out) {
      seq = deterministic_hidden_sequence(dbn.layers[l], seq);
    }
  }
  return out;
}

RnnRbm inherit_rnn_layer(const RnnRbm& parent, RngStream& rng) {
  const Index width = parent.n_hidden();
  RnnRbm child = RnnRbm::initialized(width, width, width, rng);
  child.base.b = parent.base.c;
  child.base.c = parent.base.c;
  return child;
}

Matrix predict_sequence_deep(const RnnDbn& model, const Matrix& sequence) {
  if (model.layers.empty()) {
    throw Error("predict_sequence_deep: model has no layers");
  }
  const std::size_t L = model.layers.size();
  // inputs[l] is the sequence seen by layer l.
  std::vector<Matrix> inputs{sequence};
  for (std::size_t l = 0; l + 1 < L; ++l) {
    inputs.push_back(deterministic_hidden_sequence(model.layers[l], inputs[l]));
  }
  Matrix prediction = predict_sequence(model.layers[L - 1], inputs[L - 1]);
  for (std::size_t l = L - 1; l-- > 0;) {
    const RnnRbm& layer = model.layers[l];
    const Unrolled un = unroll(layer, inputs[l]);
    prediction = sigmoid(Matrix(un.b + prediction * layer.base.W.transpose()));
  }
  return prediction;
}

Vector predict_next_deep(const RnnDbn& model, const Matrix& prefix) {
  if (model.layers.empty()) {
    throw Error("predict_next_deep: model has no layers");
  }
  // Append a placeholder frame; its prediction row only reads the prefix.
  Matrix padded(prefix.rows() + 1, prefix.cols());
  padded.topRows(prefix.rows()) = prefix;
  padded.row(prefix.rows()).setZero();
  return predict_sequence_deep(model, padded).row(prefix.rows()).transpose();
}

PredictionMetrics evaluate_next_frame_deep(const RnnDbn& model,
                                           std::span<const Matrix> sequences) {
  MetricAccumulator acc;
  for (const auto& seq : sequences) {
    acc.add(seq, predict_sequence_deep(model, seq), 1);
  }
  return acc.result();
}

RnnDbnTrainer RnnDbnTrainer::start(Index n_visible, const TrainConfig& cfg,
                                   const RngStream& root) {
  cfg.validate();
  RngStream init = layer_stream(root, 0).split(0);
  RnnDbnTrainer t;
  t.current = RnnRbmTrainer::start(initial_rnn_rbm(n_visible, cfg, init), cfg);
  return t;
}

LogRow RnnDbnTrainer::step(std::span<const Matrix> sequences, const TrainConfig& cfg,
                           const RngStream& root) {
  if (done) {
    throw Error("RnnDbnTrainer::step called after training finished");
  }
  const std::size_t layer = dbn.depth();
  if (layer_input_depth_ != layer) {
    layer_input_ = propagate_sequences(dbn, sequences, layer);
    layer_input_depth_ = layer;
  }
  LogRow row = train_rnn_rbm_epoch(current, layer_input_, cfg, layer_stream(root, layer),
                                   static_cast<int>(layer), static_cast<Index>(layer + 1));
  if (current.epoch < cfg.epochs) {
    return row;
  }

  // Final-epoch statistics; energy averaged over every frame of the layer input.
  if (current.stats.count.size() == 0 || current.stats.count.maxCoeff() <= 0.0) {
    throw Error("layer_totals: layer has not been trained");
  }
  dbn.layer_stats.push_back(
      LayerTotals{current.stats.total_variance_c() + current.stats.total_variance_w(),
                  mean_sequence_energy(current.model, layer_input_)});
  dbn.layers.push_back(current.model);
  const bool grow = cfg.adaptive
                        ? layer_generation_condition(dbn.layer_stats, cfg.layers)
                        : static_cast<int>(dbn.depth()) < cfg.layers.max_layers;
  if (grow) {
    RngStream init = layer_stream(root, layer + 1).split(0);
    current = RnnRbmTrainer::start(inherit_rnn_layer(dbn.layers.back(), init), cfg);
    row.events.push_back({StructureEvent::Kind::add_layer, static_cast<Index>(layer + 1),
                          dbn.layer_stats.back().wd});
  } else {
    done = true;
  }
  return row;
}

RnnDbn RnnDbnTrainer::snapshot() const {
  RnnDbn out = dbn;
  if (!done) {
    out.layers.push_back(current.model);
  }
  return out;
}

RnnDbnResult train_adaptive_rnn_dbn(std::span<const Matrix> sequences, const TrainConfig& cfg,
                                    const RngStream& root) {
  if (sequences.empty()) {
    throw DataError("train_adaptive_rnn_dbn: no training sequences");
  }
  RnnDbnTrainer trainer = RnnDbnTrainer::start(sequences.front().cols(), cfg, root);
  RnnDbnResult result;
  while (!trainer.done) {
    result.log.rows.push_back(trainer.step(sequences, cfg, root));
  }
  result.model = trainer.dbn;
  return result;
}

} // namespace adrbm
