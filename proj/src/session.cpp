#include "adrbm/session.hpp"

#include <chrono>
#include <fstream>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "adrbm/data_io.hpp"
#include "adrbm/errors.hpp"

namespace adrbm {

namespace fs = std::filesystem;

namespace {

// Layout of the 1 x kStatusWidth "train.status" tensor.
enum StatusField {
  kDone,
  kEpoch,
  kGenerationDone,
  kQuietEpochs,
  kGenerationEnd,
  kPeakHidden,
  kSteps,
  kStatsDecay,
  kStatusWidth
};

std::string layer_key(std::size_t l, std::string_view name) {
  return fmt::format("layer{}.{}", l, name);
}

void put_layer(Checkpoint& ckpt, std::size_t l, const Rbm& rbm) {
  ckpt.layers.push_back({rbm.n_visible(), rbm.n_hidden(), 0});
  ckpt.put(layer_key(l, "b"), rbm.b);
  ckpt.put(layer_key(l, "c"), rbm.c);
  ckpt.put(layer_key(l, "W"), rbm.W);
}

void put_layer(Checkpoint& ckpt, std::size_t l, const RnnRbm& m) {
  ckpt.layers.push_back({m.n_visible(), m.n_hidden(), m.state_dim()});
  ckpt.put(layer_key(l, "b"), m.base.b);
  ckpt.put(layer_key(l, "c"), m.base.c);
  ckpt.put(layer_key(l, "W"), m.base.W);
  ckpt.put(layer_key(l, "u"), m.u_bias);
  ckpt.put(layer_key(l, "W_uv"), m.W_uv);
  ckpt.put(layer_key(l, "W_uh"), m.W_uh);
  ckpt.put(layer_key(l, "W_vu"), m.W_vu);
  ckpt.put(layer_key(l, "W_uu"), m.W_uu);
  ckpt.put(layer_key(l, "u0"), m.u0);
}

Rbm get_rbm(const Checkpoint& ckpt, std::size_t l) {
  Rbm rbm{ckpt.get_vector(layer_key(l, "b")), ckpt.get_vector(layer_key(l, "c")),
          ckpt.get(layer_key(l, "W"))};
  rbm.check_dims();
  return rbm;
}

RnnRbm get_rnn_rbm(const Checkpoint& ckpt, std::size_t l) {
  RnnRbm m{get_rbm(ckpt, l),
           ckpt.get_vector(layer_key(l, "u")),
           ckpt.get(layer_key(l, "W_uv")),
           ckpt.get(layer_key(l, "W_uh")),
           ckpt.get(layer_key(l, "W_vu")),
           ckpt.get(layer_key(l, "W_uu")),
           ckpt.get_vector(layer_key(l, "u0"))};
  m.check_dims();
  return m;
}

void put_totals(Checkpoint& ckpt, std::size_t l, const LayerTotals& t) {
  Matrix m(1, 2);
  m << t.wd, t.energy;
  ckpt.put(layer_key(l, "totals"), std::move(m));
}

LayerTotals get_totals(const Checkpoint& ckpt, std::size_t l) {
  const Matrix& m = ckpt.get(layer_key(l, "totals"));
  if (m.rows() != 1 || m.cols() != 2) {
    throw CheckpointDimensionError(layer_key(l, "totals") + " must be 1x2");
  }
  return {m(0, 0), m(0, 1)};
}

template <typename Stack, typename LayerTrainer>
Checkpoint encode_state(ModelKind kind, std::uint64_t seed, const Stack& dbn,
                        const LayerTrainer& current, bool done, int steps) {
  Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.seed = seed;
  ckpt.rng_id = std::string(RngStream::algorithm_id);
  for (std::size_t l = 0; l < dbn.depth(); ++l) {
    put_layer(ckpt, l, dbn.layers[l]);
    put_totals(ckpt, l, dbn.layer_stats[l]);
  }
  Matrix status = Matrix::Zero(1, kStatusWidth);
  status(0, kDone) = done ? 1.0 : 0.0;
  status(0, kSteps) = steps;
  if (!done) {
    put_layer(ckpt, dbn.depth(), current.model);
    status(0, kEpoch) = current.epoch;
    status(0, kGenerationDone) = current.phase.generation_done ? 1.0 : 0.0;
    status(0, kQuietEpochs) = current.phase.quiet_epochs;
    status(0, kGenerationEnd) = current.phase.generation_end_epoch;
    status(0, kPeakHidden) = static_cast<double>(current.phase.peak_hidden);
    status(0, kStatsDecay) = current.stats.decay;
    ckpt.put("train.stats.mean_c", current.stats.mean_c);
    ckpt.put("train.stats.sq_c", current.stats.sq_c);
    ckpt.put("train.stats.mean_W", current.stats.mean_W);
    ckpt.put("train.stats.sq_W", current.stats.sq_W);
    ckpt.put("train.stats.count", current.stats.count);
  }
  ckpt.put("train.status", std::move(status));
  return ckpt;
}

template <typename Trainer, typename GetLayer>
Trainer decode_state(const Checkpoint& ckpt, int& steps, GetLayer get_layer) {
  const Matrix& status = ckpt.get("train.status");
  if (status.rows() != 1 || status.cols() != kStatusWidth) {
    throw CheckpointDimensionError("train.status has the wrong shape");
  }
  Trainer t;
  t.done = status(0, kDone) != 0.0;
  steps = static_cast<int>(status(0, kSteps));
  const std::size_t completed = t.done ? ckpt.layers.size() : ckpt.layers.size() - 1;
  if (!t.done && ckpt.layers.empty()) {
    throw CheckpointDimensionError("checkpoint in training has no current layer");
  }
  for (std::size_t l = 0; l < completed; ++l) {
    t.dbn.layers.push_back(get_layer(ckpt, l));
    t.dbn.layer_stats.push_back(get_totals(ckpt, l));
  }
  t.dbn.check_chain();
  if (!t.done) {
    auto& cur = t.current;
    cur.model = get_layer(ckpt, completed);
    cur.epoch = static_cast<int>(status(0, kEpoch));
    cur.phase.generation_done = status(0, kGenerationDone) != 0.0;
    cur.phase.quiet_epochs = static_cast<int>(status(0, kQuietEpochs));
    cur.phase.generation_end_epoch = static_cast<int>(status(0, kGenerationEnd));
    cur.phase.peak_hidden = static_cast<Index>(status(0, kPeakHidden));
    cur.stats.decay = status(0, kStatsDecay);
    cur.stats.mean_c = ckpt.get_vector("train.stats.mean_c");
    cur.stats.sq_c = ckpt.get_vector("train.stats.sq_c");
    cur.stats.mean_W = ckpt.get("train.stats.mean_W");
    cur.stats.sq_W = ckpt.get("train.stats.sq_W");
    cur.stats.count = ckpt.get_vector("train.stats.count");
    const Index J = cur.model.n_hidden();
    const Index I = cur.model.n_visible();
    if (cur.stats.n_hidden() != J || cur.stats.sq_c.size() != J || cur.stats.count.size() != J ||
        cur.stats.mean_W.rows() != I || cur.stats.mean_W.cols() != J ||
        cur.stats.sq_W.rows() != I || cur.stats.sq_W.cols() != J) {
      throw CheckpointDimensionError("training statistics disagree with the current layer");
    }
    if (completed > 0 && cur.model.n_visible() != t.dbn.layers.back().n_hidden()) {
      throw CheckpointDimensionError("current layer does not stack on the completed layers");
    }
  }
  return t;
}

void require_kind(const Checkpoint& ckpt, bool recurrent) {
  if (is_recurrent(ckpt.kind) != recurrent) {
    throw CheckpointError(fmt::format("checkpoint holds a {} model", to_string(ckpt.kind)));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << text;
}

// Keeps the header and the first `rows` data rows of an existing log.
std::string truncated_log(const fs::path& path, int rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("resume needs the run's existing " + path.string());
  }
  std::string out;
  std::string line;
  int kept = -1;
  while (kept < rows && std::getline(in, line)) {
    out += line;
    out += '\n';
    ++kept;
  }
  if (kept < rows) {
    throw CheckpointError(fmt::format("{} has {} rows but the checkpoint recorded {}",
                                      path.string(), std::max(kept, 0), rows));
  }
  return out;
}

std::string structure_line(const std::vector<Index>& hidden) {
  std::string s;
  for (Index j : hidden) {
    s += (s.empty() ? "" : ",") + std::to_string(j);
  }
  return s;
}

template <typename Trainer, typename Data>
TrainReport drive(Trainer& trainer, int steps, const Data& data, const RunConfig& cfg,
                  const TrainConfig& train, int stop_after, std::ofstream& log) {
  const fs::path ckpt_path = cfg.out_dir / kRunCheckpointFile;
  TrainReport report;
  double last_error = 0.0;
  int ran = 0;
  while (!trainer.done && (stop_after < 0 || ran < stop_after)) {
    const LogRow row = trainer.step(data, train, RngStream(cfg.seed));
    ++steps;
    ++ran;
    last_error = row.error;
    log << format_log_row(row) << '\n';
    log.flush();
    save_checkpoint(to_checkpoint(cfg.kind, cfg.seed, trainer, steps), ckpt_path);
  }
  report.steps = steps;
  report.finished = trainer.done;
  report.summary = fmt::format("final_train_error = {:.17g}\n", last_error);
  return report;
}

} // namespace

Checkpoint to_checkpoint(ModelKind kind, std::uint64_t seed, const DbnTrainer& trainer,
                         int steps) {
  return encode_state(kind, seed, trainer.dbn, trainer.current, trainer.done, steps);
}

Checkpoint to_checkpoint(ModelKind kind, std::uint64_t seed, const RnnDbnTrainer& trainer,
                         int steps) {
  return encode_state(kind, seed, trainer.dbn, trainer.current, trainer.done, steps);
}

DbnTrainer restore_dbn_trainer(const Checkpoint& ckpt, int& steps) {
  require_kind(ckpt, false);
  return decode_state<DbnTrainer>(ckpt, steps, get_rbm);
}

RnnDbnTrainer restore_rnn_dbn_trainer(const Checkpoint& ckpt, int& steps) {
  require_kind(ckpt, true);
  return decode_state<RnnDbnTrainer>(ckpt, steps, get_rnn_rbm);
}

Dbn dbn_from_checkpoint(const Checkpoint& ckpt) {
  require_kind(ckpt, false);
  Dbn dbn;
  for (std::size_t l = 0; l < ckpt.layers.size(); ++l) {
    dbn.layers.push_back(get_rbm(ckpt, l));
  }
  dbn.check_chain();
  return dbn;
}

RnnDbn rnn_dbn_from_checkpoint(const Checkpoint& ckpt) {
  require_kind(ckpt, true);
  RnnDbn dbn;
  for (std::size_t l = 0; l < ckpt.layers.size(); ++l) {
    dbn.layers.push_back(get_rnn_rbm(ckpt, l));
  }
  dbn.check_chain();
  return dbn;
}

std::string describe_checkpoint(const Checkpoint& ckpt) {
  std::string out = fmt::format("kind: {}\nseed: {}\nrng: {}\nlayers: {}\n", to_string(ckpt.kind),
                                ckpt.seed, ckpt.rng_id, ckpt.layers.size());
  for (std::size_t l = 0; l < ckpt.layers.size(); ++l) {
    const auto& d = ckpt.layers[l];
    out += fmt::format("  layer {}: visible={} hidden={}", l, d.n_visible, d.n_hidden);
    if (is_recurrent(ckpt.kind)) {
      out += fmt::format(" state={}", d.state_dim);
    }
    out += '\n';
  }
  if (ckpt.has("train.status")) {
    const Matrix& s = ckpt.get("train.status");
    if (s.cols() == kStatusWidth) {
      out += fmt::format("training: {} after {} epochs\n",
                         s(0, kDone) != 0.0 ? "complete" : "in progress",
                         static_cast<long long>(s(0, kSteps)));
    }
  }
  out += fmt::format("tensors: {}\n", ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    out += fmt::format("  {} {}x{}\n", t.name, t.value.rows(), t.value.cols());
  }
  return out;
}

TrainReport run_train(const TrainRequest& request) {
  const RunConfig& cfg = request.config;
  cfg.validate(true);
  if (cfg.out_dir.empty()) {
    throw ConfigError("out.dir is required");
  }
  const auto started = std::chrono::steady_clock::now();
  const TrainConfig train = cfg.effective_train();
  const SequenceDataset data = load_split(cfg.train_path, cfg.test_path);
  const std::vector<Matrix> train_seqs = data.train_frames();
  const std::vector<Matrix> test_seqs = data.test_frames();

  fs::create_directories(cfg.out_dir);
  const fs::path log_path = cfg.out_dir / kRunLogFile;

  std::optional<Checkpoint> resumed;
  int steps = 0;
  std::string log_prefix = std::string(kLogCsvHeader) + "\n";
  if (!request.resume.empty()) {
    resumed = load_checkpoint(request.resume);
    if (resumed->kind != cfg.kind) {
      throw ConfigError(fmt::format("checkpoint kind {} does not match config kind {}",
                                    to_string(resumed->kind), to_string(cfg.kind)));
    }
    if (resumed->seed != cfg.seed) {
      throw ConfigError(fmt::format("checkpoint seed {} does not match config seed {}",
                                    resumed->seed, cfg.seed));
    }
    if (resumed->rng_id != RngStream::algorithm_id) {
      throw CheckpointVersionError("checkpoint was written with RNG " + resumed->rng_id);
    }
    if (!resumed->layers.empty() && resumed->layers.front().n_visible != data.dim) {
      throw DimensionError(fmt::format("checkpoint expects {} visible units, data has {}",
                                       resumed->layers.front().n_visible, data.dim));
    }
  }

  write_text(cfg.out_dir / kRunConfigFile, render_run_config(cfg));

  TrainReport report;
  std::vector<Index> hidden;
  std::string test_line;
  auto finish = [&](auto& trainer, const auto& train_data) {
    if (resumed) {
      log_prefix = truncated_log(log_path, steps);
    }
    std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
    if (!log) {
      throw DataError("cannot write " + log_path.string());
    }
    log << log_prefix;
    log.flush();
    report = drive(trainer, steps, train_data, cfg, train, request.stop_after, log);
    const auto model = trainer.snapshot();
    for (const auto& layer : model.layers) {
      hidden.push_back(layer.n_hidden());
    }
    if (!test_seqs.empty()) {
      const Checkpoint ckpt = load_checkpoint(cfg.out_dir / kRunCheckpointFile);
      const PredictionMetrics m = evaluate_checkpoint(ckpt, test_seqs);
      test_line = fmt::format("test_error = {:.17g}\ntest_correct_ratio = {:.17g}\n", m.error,
                              m.correct_ratio);
    }
  };

  if (is_recurrent(cfg.kind)) {
    RnnDbnTrainer trainer = resumed ? restore_rnn_dbn_trainer(*resumed, steps)
                                    : RnnDbnTrainer::start(data.dim, train, RngStream(cfg.seed));
    finish(trainer, std::span<const Matrix>(train_seqs));
  } else {
    DbnTrainer trainer = resumed ? restore_dbn_trainer(*resumed, steps)
                                 : DbnTrainer::start(data.dim, train, RngStream(cfg.seed));
    finish(trainer, stack_frames(train_seqs));
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report.summary = fmt::format(
      "kind = {}\nseed = {}\nstatus = {}\nepochs_logged = {}\n{}{}layers = {}\nhidden = {}\n"
      "wall_seconds = {:.3f}\n",
      to_string(cfg.kind), cfg.seed, report.finished ? "complete" : "interrupted", report.steps,
      report.summary, test_line, hidden.size(), structure_line(hidden), seconds);
  write_text(cfg.out_dir / kRunSummaryFile, report.summary);
  return report;
}

PredictionMetrics evaluate_checkpoint(const Checkpoint& ckpt, std::span<const Matrix> sequences) {
  if (ckpt.layers.empty()) {
    throw CheckpointDimensionError("checkpoint has no layers");
  }
  const Index I = ckpt.layers.front().n_visible;
  for (const auto& s : sequences) {
    if (s.cols() != I) {
      throw DimensionError(
          fmt::format("dataset has {} units per frame, model expects {}", s.cols(), I));
    }
  }
  if (is_recurrent(ckpt.kind)) {
    return evaluate_next_frame_deep(rnn_dbn_from_checkpoint(ckpt), sequences);
  }
  const Dbn dbn = dbn_from_checkpoint(ckpt);
  MetricAccumulator acc;
  for (const auto& s : sequences) {
    Matrix x = propagate_up(dbn, s);
    for (std::size_t l = dbn.depth(); l-- > 0;) {
      x = visible_conditional(dbn.layers[l], x);
    }
    acc.add(s, x, 0);
  }
  return acc.result();
}

Matrix sample_sequence(const Checkpoint& ckpt, Index length, std::uint64_t seed) {
  if (!is_recurrent(ckpt.kind)) {
    throw CheckpointError(
        fmt::format("sampling needs a recurrent model, checkpoint holds {}", to_string(ckpt.kind)));
  }
  if (length < 0) {
    throw ConfigError("sample length must be non-negative");
  }
  const RnnDbn model = rnn_dbn_from_checkpoint(ckpt);
  const RngStream root(seed);
  Matrix out(length, model.layers.front().n_visible());
  for (Index t = 0; t < length; ++t) {
    const Vector p = predict_next_deep(model, out.topRows(t));
    RngStream rng = root.split(static_cast<std::uint64_t>(t));
    out.row(t) = sample_bernoulli(p, rng).transpose();
  }
  return out;
}

} // namespace adrbm
