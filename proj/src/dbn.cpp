#include "adrbm/dbn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adrbm/errors.hpp"

namespace adrbm {

namespace {

constexpr std::uint64_t kStructureStream = ~std::uint64_t{0};

void add_penalties(RbmGradient& g, const Rbm& model, PenaltySet penalty,
                   const ForgettingConfig& forget, const Matrix& batch) {
  if (penalty == PenaltySet::none) {
    return;
  }
  const ForgettingMode weight_mode =
      penalty == PenaltySet::decay_clarify ? ForgettingMode::decay : ForgettingMode::selective;
  const double weight_eps =
      weight_mode == ForgettingMode::decay ? forget.epsilon1 : forget.epsilon3;
  if (weight_eps > 0.0) {
    g += forgetting_gradient(model, weight_mode, forget, batch);
  }
  if (forget.epsilon2 > 0.0) {
    g += forgetting_gradient(model, ForgettingMode::clarify, forget, batch);
  }
}

} // namespace

void LayerGenConfig::validate() const {
  if (!(alpha_WD > 0.0) || !(alpha_E > 0.0)) {
    throw ConfigError("layers.alpha_WD and layers.alpha_E must be > 0");
  }
  if (!(theta_L1 > 0.0) || !(theta_L2 > 0.0)) {
    throw ConfigError("layers.theta_L1 and layers.theta_L2 must be > 0");
  }
  if (max_layers < 1) {
    throw ConfigError("layers.max_layers must be >= 1");
  }
}

void TrainConfig::validate() const {
  cd.validate();
  adapt.validate();
  forget.validate();
  layers.validate();
  if (epochs < 1) {
    throw ConfigError("train.epochs must be >= 1");
  }
  if (!(clip_norm >= 0.0)) {
    throw ConfigError("train.clip_norm must be >= 0");
  }
  if (n_hidden < 1) {
    throw ConfigError("model.n_hidden must be >= 1");
  }
  if (state_dim < 0) {
    throw ConfigError("model.state_dim must be >= 0");
  }
  if (adaptive && (n_hidden < adapt.min_hidden || n_hidden > adapt.max_hidden)) {
    throw ConfigError("model.n_hidden must lie within [adapt.min_hidden, adapt.max_hidden]");
  }
}

LayerTotals layer_totals(const GradientStats& stats, const Rbm& rbm, const Matrix& data) {
  if (stats.count.size() == 0 || stats.count.maxCoeff() <= 0.0) {
    throw Error("layer_totals: layer has not been trained");
  }
  return LayerTotals{stats.total_variance_c() + stats.total_variance_w(),
                     mean_energy(rbm, data)};
}

bool layer_generation_condition(std::span<const LayerTotals> totals,
                                const LayerGenConfig& cfg) {
  if (totals.empty() || static_cast<int>(totals.size()) >= cfg.max_layers) {
    return false;
  }
  double wd = 0.0;
  double e = 0.0;
  for (const auto& t : totals) {
    wd += cfg.alpha_WD * t.wd;
    e += cfg.alpha_E * std::abs(t.energy);
  }
  return wd > cfg.theta_L1 && e > cfg.theta_L2;
}

void Dbn::check_chain() const {
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

bool should_generate_layer(const Dbn& dbn, const LayerGenConfig& cfg) {
  return layer_generation_condition(dbn.layer_stats, cfg);
}

Rbm inherit_layer(const Rbm& parent, RngStream& rng) {
  const Index width = parent.n_hidden();
  Rbm child = Rbm::initialized(width, width, rng);
  child.b = parent.c;
  child.c = parent.c;
  return child;
}

void generate_layer(Dbn& dbn, const LayerGenConfig& cfg, RngStream& rng) {
  if (dbn.layers.empty()) {
    throw Error("generate_layer: DBN has no parent layer");
  }
  if (static_cast<int>(dbn.layers.size()) >= cfg.max_layers) {
    throw CapacityError("generate_layer: DBN already has max_layers=" +
                        std::to_string(cfg.max_layers) + " layers");
  }
  dbn.layers.push_back(inherit_layer(dbn.layers.back(), rng));
}

Matrix propagate_up(const Dbn& dbn, const Matrix& data, std::size_t n_layers) {
  Matrix x = data;
  for (std::size_t l = 0; l < n_layers && l < dbn.layers.size(); ++l) {
    x = hidden_conditional(dbn.layers[l], x);
  }
  return x;
}

Matrix propagate_up(const Dbn& dbn, const Matrix& data) {
  return propagate_up(dbn, data, dbn.layers.size());
}

void clip_gradient(RbmGradient& g, double max_norm) {
  if (max_norm <= 0.0) {
    return;
  }
  const double norm = std::sqrt(g.squared_norm());
  if (norm > max_norm) {
    g *= max_norm / norm;
  }
}

RbmTrainer RbmTrainer::start(Rbm model, const TrainConfig& cfg) {
  RbmTrainer t;
  t.stats = GradientStats::zeros(model.n_visible(), model.n_hidden(), cfg.adapt.stats_decay);
  t.phase.peak_hidden = model.n_hidden();
  t.model = std::move(model);
  return t;
}

LogRow train_rbm_epoch(RbmTrainer& trainer, const Matrix& data, const TrainConfig& cfg,
                       const RngStream& layer_rng, int layer, Index n_layers) {
  if (data.rows() == 0) {
    throw DataError("train_rbm_epoch: empty training data");
  }
  const int epoch = trainer.epoch + 1;
  const EpochPlan plan =
      plan_epoch(trainer.phase, cfg.adapt, cfg.forget, epoch, cfg.epochs, cfg.adaptive);
  const RngStream epoch_rng = layer_rng.split(static_cast<std::uint64_t>(epoch));

  RngStream shuffle_rng = epoch_rng.split(0);
  const std::vector<std::size_t> order =
      permutation(static_cast<std::size_t>(data.rows()), shuffle_rng);
  const auto batch_size = static_cast<std::size_t>(cfg.cd.batch_size);

  Rbm& model = trainer.model;
  std::uint64_t batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Matrix batch(static_cast<Index>(end - start), data.cols());
    for (std::size_t r = start; r < end; ++r) {
      batch.row(static_cast<Index>(r - start)) = data.row(static_cast<Index>(order[r]));
    }
    RngStream batch_rng = epoch_rng.split(++batch_index);
    RbmGradient g = cd_step(model, batch, cfg.cd, batch_rng);
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
    const Vector mean_act = hidden_conditional(model, data).colwise().mean().transpose();
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

  const Matrix ph = hidden_conditional(model, data);
  row.epoch = epoch;
  row.layer = layer;
  row.energy = mean_energy(model, data);
  row.error = mean_row_cross_entropy(data, visible_conditional(model, ph));
  row.wd_c = trainer.stats.total_variance_c();
  row.wd_w = trainer.stats.total_variance_w();
  row.n_hidden = model.n_hidden();
  row.n_layers = n_layers;
  return row;
}

RngStream layer_stream(const RngStream& root, std::size_t layer) {
  return root.split(static_cast<std::uint64_t>(layer) + 1);
}

DbnTrainer DbnTrainer::start(Index n_visible, const TrainConfig& cfg, const RngStream& root) {
  cfg.validate();
  RngStream init = layer_stream(root, 0).split(0);
  DbnTrainer t;
  t.current = RbmTrainer::start(Rbm::initialized(n_visible, cfg.n_hidden, init), cfg);
  return t;
}

LogRow DbnTrainer::step(const Matrix& data, const TrainConfig& cfg, const RngStream& root) {
  if (done) {
    throw Error("DbnTrainer::step called after training finished");
  }
  const std::size_t layer = dbn.depth();
  if (layer_input_depth_ != layer) {
    layer_input_ = propagate_up(dbn, data);
    layer_input_depth_ = layer;
  }
  LogRow row = train_rbm_epoch(current, layer_input_, cfg, layer_stream(root, layer),
                               static_cast<int>(layer), static_cast<Index>(layer + 1));
  if (current.epoch < cfg.epochs) {
    return row;
  }

  dbn.layer_stats.push_back(layer_totals(current.stats, current.model, layer_input_));
  dbn.layers.push_back(current.model);
  // A traditional (non-adaptive) stack has fixed depth max_layers.
  const bool grow = cfg.adaptive
                        ? should_generate_layer(dbn, cfg.layers)
                        : static_cast<int>(dbn.depth()) < cfg.layers.max_layers;
  if (grow) {
    RngStream init = layer_stream(root, layer + 1).split(0);
    generate_layer(dbn, cfg.layers, init);
    Rbm fresh = std::move(dbn.layers.back());
    dbn.layers.pop_back();
    current = RbmTrainer::start(std::move(fresh), cfg);
    row.events.push_back({StructureEvent::Kind::add_layer, static_cast<Index>(layer + 1),
                          dbn.layer_stats.back().wd});
  } else {
    done = true;
  }
  return row;
}

Dbn DbnTrainer::snapshot() const {
  Dbn out = dbn;
  if (!done) {
    out.layers.push_back(current.model);
  }
  return out;
}

DbnResult train_adaptive_dbn(const Matrix& data, const TrainConfig& cfg, const RngStream& root) {
  DbnTrainer trainer = DbnTrainer::start(data.cols(), cfg, root);
  DbnResult result;
  while (!trainer.done) {
    result.log.rows.push_back(trainer.step(data, cfg, root));
  }
  result.dbn = trainer.dbn;
  return result;
}

} // namespace adrbm
