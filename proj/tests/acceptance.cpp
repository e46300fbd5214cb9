#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "adrbm/adapt.hpp"
#include "adrbm/data_io.hpp"
#include "adrbm/dbn.hpp"
#include "adrbm/rbm.hpp"
#include "adrbm/rnn_dbn.hpp"
#include "adrbm/rnn_rbm.hpp"
#include "adrbm/session.hpp"

#include "oracles.hpp"

using namespace adrbm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Exact log-likelihood gradient against central differences of the oracle.
Outcome exact_gradient_oracle() {
  const auto start = Clock::now();
  RngStream rng(101);
  double worst = 0.0;
  for (int m = 0; m < 20; ++m) {
    const Index I = 1 + static_cast<Index>(rng.below(4));
    const Index J = 1 + static_cast<Index>(rng.below(3));
    Rbm rbm = oracle::random_rbm(I, J, 1.0, rng);
    const Matrix batch = oracle::random_binary(5, I, rng);
    const RbmGradient g = log_likelihood_gradient_exact(rbm, batch);
    const auto ll = [&] { return oracle::mean_log_likelihood(rbm, batch); };
    const Matrix fd_b = oracle::central_difference(rbm.b, ll, 1e-5);
    const Matrix fd_c = oracle::central_difference(rbm.c, ll, 1e-5);
    const Matrix fd_W = oracle::central_difference(rbm.W, ll, 1e-5);
    worst = std::max({worst, oracle::relative_error(g.db, fd_b),
                      oracle::relative_error(g.dc, fd_c), oracle::relative_error(g.dW, fd_W)});
  }
  const double secs = seconds_since(start);
  return {worst < 1e-6 && secs < 10.0,
          fmt::format("max relative error {:.3g} (< 1e-6), {:.2f} s (< 10 s)", worst, secs)};
}

// Normalization and conditionals on every shape with I + J <= 12.
Outcome distribution_correctness() {
  RngStream rng(202);
  double worst_sum = 0.0;
  double worst_cond = 0.0;
  int instances = 0;
  for (Index I = 1; I <= 11; ++I) {
    for (Index J = 1; I + J <= 12; ++J) {
      ++instances;
      const Rbm rbm = oracle::random_rbm(I, J, 0.5, rng);
      double total = 0.0;
      for (std::uint64_t vc = 0; vc < (1ULL << I); ++vc) {
        const Vector v = oracle::bits(vc, I);
        for (std::uint64_t hc = 0; hc < (1ULL << J); ++hc) {
          total += prob_exact(rbm, v, oracle::bits(hc, J));
        }
      }
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
      for (int probe = 0; probe < 4; ++probe) {
        const Vector v = oracle::random_binary(1, I, rng).row(0).transpose();
        const Vector h = oracle::random_binary(1, J, rng).row(0).transpose();
        worst_cond = std::max(
            {worst_cond,
             (hidden_conditional(rbm, v) - oracle::hidden_marginal(rbm, v)).cwiseAbs().maxCoeff(),
             (visible_conditional(rbm, h) - oracle::visible_marginal(rbm, h))
                 .cwiseAbs()
                 .maxCoeff()});
      }
    }
  }
  return {worst_sum <= 1e-12 && worst_cond <= 1e-10,
          fmt::format("{} shapes, max |sum - 1| {:.3g} (<= 1e-12), max conditional gap {:.3g} "
                      "(<= 1e-10)",
                      instances, worst_sum, worst_cond)};
}

// Exact sequence-cost gradient against central differences of the oracle.
Outcome bptt_correctness() {
  const auto start = Clock::now();
  RngStream rng(303);
  double worst = 0.0;
  for (int m = 0; m < 10; ++m) {
    const Index I = 2 + static_cast<Index>(rng.below(2));
    const Index J = 1 + static_cast<Index>(rng.below(3));
    const Index K = 1 + static_cast<Index>(rng.below(3));
    const Index T = 2 + static_cast<Index>(m % 2);
    RnnRbm model = oracle::random_rnn_rbm(I, J, K, 0.7, rng);
    const Matrix seq = oracle::random_binary(T, I, rng);
    const RnnRbmGradient g = sequence_cost_gradient_exact(model, seq);
    const auto cost = [&] { return oracle::sequence_cost(model, seq); };
    const double step = 1e-5;
    const std::pair<Matrix, Matrix> groups[] = {
        {g.db, oracle::central_difference(model.base.b, cost, step)},
        {g.dc, oracle::central_difference(model.base.c, cost, step)},
        {g.dW, oracle::central_difference(model.base.W, cost, step)},
        {g.du, oracle::central_difference(model.u_bias, cost, step)},
        {g.dW_uv, oracle::central_difference(model.W_uv, cost, step)},
        {g.dW_uh, oracle::central_difference(model.W_uh, cost, step)},
        {g.dW_vu, oracle::central_difference(model.W_vu, cost, step)},
        {g.dW_uu, oracle::central_difference(model.W_uu, cost, step)},
        {g.du0, oracle::central_difference(model.u0, cost, step)},
    };
    for (const auto& [analytic, numeric] : groups) {
      worst = std::max(worst, oracle::relative_error(analytic, numeric));
    }
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 30.0,
          fmt::format("max relative error {:.3g} (< 1e-4), {:.2f} s (< 30 s)", worst, secs)};
}

GradientStats stats_with(const Vector& var_c, const Matrix& var_w) {
  GradientStats s = GradientStats::zeros(var_w.rows(), var_w.cols(), 0.9);
  s.sq_c = var_c;
  s.sq_W = var_w;
  s.count.setConstant(1e6);
  return s;
}

// Decision tables for the four trigger rules at the default thresholds.
Outcome trigger_rules() {
  int rows = 0;
  int wrong = 0;
  const auto expect = [&](bool got, bool want) {
    ++rows;
    wrong += got != want ? 1 : 0;
  };

  const AdaptConfig adapt;
  if (adapt.theta_G != 0.001 || adapt.theta_A != 0.1) {
    return {false, "default thresholds changed"};
  }
  struct GenRow {
    double var_c;
    double var_w;
    bool fires;
  };
  for (const GenRow& r : std::vector<GenRow>{{1.0, 0.001, false},
                                             {1.0, 0.0011, true},
                                             {1.0, 0.0009, false},
                                             {0.0, 10.0, false},
                                             {0.05, 0.04, true},
                                             {0.01, 0.01, false}}) {
    const GradientStats s =
        stats_with(Vector::Constant(1, r.var_c), Matrix::Constant(4, 1, r.var_w));
    expect(!generation_candidates(s, adapt).empty(), r.fires);
  }

  Vector means(5);
  means << 0.0, 0.1, 0.0999999, 0.1000001, 0.9;
  const std::vector<bool> mask = annihilation_mask_from_means(means, adapt);
  const bool want_mask[] = {true, false, true, false, false};
  for (int j = 0; j < 5; ++j) {
    expect(mask[static_cast<std::size_t>(j)], want_mask[j]);
  }

  LayerGenConfig layers;
  if (layers.theta_L1 != 0.01 || layers.theta_L2 != 0.01) {
    return {false, "default layer thresholds changed"};
  }
  layers.max_layers = 3;
  struct LayerRow {
    std::vector<LayerTotals> totals;
    bool grow;
  };
  for (const LayerRow& r : std::vector<LayerRow>{
           {{{0.02, 0.02}}, true},
           {{{0.0, 5.0}}, false},
           {{{0.02, 0.0}}, false},
           {{{0.01, 0.02}}, false},
           {{{0.02, 0.01}}, false},
           {{{0.005, 0.02}, {0.005, 0.0}}, false},
           {{{0.006, 0.006}, {0.005, 0.005}}, true},
           {{{0.02, -0.02}}, true},
           {{{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}, false},
       }) {
    expect(layer_generation_condition(r.totals, layers), r.grow);
  }
  return {wrong == 0, fmt::format("{} of {} table rows reproduced", rows - wrong, rows)};
}

SynthCycleConfig cycle_data() {
  SynthCycleConfig sc;
  sc.dim = 8;
  sc.n_patterns = 4;
  sc.noise_flip_prob = 0.05;
  return sc;
}

// Shared settings for the adaptive recurrent scenarios.
TrainConfig scenario_config() {
  TrainConfig cfg;
  cfg.n_hidden = 4;
  cfg.epochs = 150;
  cfg.cd.batch_size = 1;
  cfg.cd.learning_rate = 0.1;
  cfg.adapt.alpha_c = 100.0;
  cfg.adapt.alpha_W = 100.0;
  cfg.adapt.theta_A = 0.3;
  cfg.adapt.max_hidden = 32;
  cfg.adapt.split_noise_sd = 0.01;
  cfg.forget.epsilon1 = 0.01;
  cfg.forget.epsilon2 = 0.01;
  cfg.forget.epsilon3 = 0.01;
  cfg.forget.forgetting_epochs = 50;
  cfg.forget.selective_epochs = 5;
  return cfg;
}

Outcome structural_dynamics() {
  const auto start = Clock::now();
  RngStream data_rng(1);
  const SequenceDataset ds = synth_cycle(cycle_data(), data_rng);
  const TrainConfig cfg = scenario_config();
  const RnnRbmResult res = train_adaptive_rnn_rbm(ds.train_frames(), cfg, RngStream(1));
  int generated = 0;
  Index peak = 0;
  for (const LogRow& row : res.log.rows) {
    peak = std::max(peak, row.n_hidden);
    for (const StructureEvent& e : row.events) {
      generated += e.kind == StructureEvent::Kind::generate ? 1 : 0;
    }
  }
  const double first = res.log.rows.front().error;
  const double last = res.log.rows.back().error;
  const Index final_j = res.model.n_hidden();
  const double secs = seconds_since(start);
  const bool pass = generated >= 1 && final_j < peak && last <= 0.5 * first && secs < 120.0;
  return {pass, fmt::format("generated {} (>= 1), J 4 -> peak {} -> final {} (< peak), error "
                            "{:.4f} -> {:.4f} (ratio {:.3f} <= 0.5), {:.1f} s (< 120 s)",
                            generated, peak, final_j, first, last, last / first, secs)};
}

Outcome adaptive_beats_fixed() {
  const auto start = Clock::now();
  std::vector<double> adaptive;
  std::vector<double> fixed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RngStream data_rng(seed);
    const SequenceDataset ds = synth_cycle(cycle_data(), data_rng);
    TrainConfig cfg = scenario_config();
    const RnnRbmResult a = train_adaptive_rnn_rbm(ds.train_frames(), cfg, RngStream(seed));
    adaptive.push_back(evaluate_next_frame(a.model, ds.test_frames()).error);
    cfg.adaptive = false;
    const RnnRbmResult f = train_adaptive_rnn_rbm(ds.train_frames(), cfg, RngStream(seed));
    fixed.push_back(evaluate_next_frame(f.model, ds.test_frames()).error);
  }
  const double ma = median(adaptive);
  const double mf = median(fixed);
  const double secs = seconds_since(start);
  return {ma <= mf && secs < 600.0,
          fmt::format("median test cross-entropy adaptive {:.4f} <= traditional {:.4f}, "
                      "{:.1f} s (< 600 s)",
                      ma, mf, secs)};
}

Outcome depth_direction() {
  const auto start = Clock::now();
  SynthCycleConfig sc = cycle_data();
  sc.parity_bits = 4;
  RngStream data_rng(1);
  const SequenceDataset ds = synth_cycle(sc, data_rng);
  TrainConfig cfg = scenario_config();
  cfg.epochs = 100;
  cfg.forget.forgetting_epochs = 33;
  cfg.layers.theta_L1 = 1e-9;
  cfg.layers.theta_L2 = 1e-9;
  cfg.layers.max_layers = 3;
  const RnnDbnResult deep = train_adaptive_rnn_dbn(ds.train_frames(), cfg, RngStream(1));
  const double deep_error = evaluate_next_frame_deep(deep.model, ds.test_frames()).error;
  TrainConfig single = cfg;
  single.layers.max_layers = 1;
  const RnnRbmResult first = train_adaptive_rnn_rbm(ds.train_frames(), single, RngStream(1));
  const double first_error = evaluate_next_frame(first.model, ds.test_frames()).error;
  const std::size_t depth = deep.model.layers.size();
  const double secs = seconds_since(start);
  return {deep_error <= first_error && depth > 1 && secs < 600.0,
          fmt::format("{} layers (> 1), test cross-entropy {:.4f} <= first layer alone {:.4f}, "
                      "{:.1f} s (< 600 s)",
                      depth, deep_error, first_error, secs)};
}

double small_weight_fraction(const Rbm& rbm) {
  return static_cast<double>((rbm.W.array().abs() < 0.01).count()) /
         static_cast<double>(rbm.W.size());
}

struct ForgettingSnapshot {
  double small = 0.0;
  double ambiguity = 0.0;
  double ll = 0.0;
};

Outcome forgetting_effect() {
  // Tiny RBM with redundant hidden units: three two-bit prototypes plus two
  // pure-noise visible bits.
  RngStream rng(808);
  const Index I = 8;
  const Index J = 6;
  Matrix data(120, I);
  for (Index n = 0; n < data.rows(); ++n) {
    for (Index i = 0; i < I; ++i) {
      if (i >= 6) {
        data(n, i) = rng.uniform() < 0.5 ? 1.0 : 0.0;
        continue;
      }
      const double bit = i / 2 == n % 3 ? 1.0 : 0.0;
      data(n, i) = rng.uniform() < 0.05 ? 1.0 - bit : bit;
    }
  }
  RngStream init = rng.split(1);
  Rbm rbm = Rbm::initialized(I, J, init);
  CdConfig cd;
  cd.learning_rate = 0.1;
  cd.batch_size = 20;
  ForgettingConfig forget; // default coefficients
  const auto epoch = [&](Rbm& model, int e, bool penalized) {
    RngStream er = rng.split(100 + static_cast<std::uint64_t>(e));
    for (Index start = 0; start < data.rows(); start += cd.batch_size) {
      const Matrix batch = data.middleRows(start, cd.batch_size);
      RbmGradient g = cd_step(model, batch, cd, er);
      if (penalized) {
        g += forgetting_gradient(model, ForgettingMode::decay, forget, batch);
        g += forgetting_gradient(model, ForgettingMode::clarify, forget, batch);
      }
      apply_update(model, g, cd.learning_rate);
    }
  };
  const auto snapshot = [&](const Rbm& model) {
    return ForgettingSnapshot{small_weight_fraction(model),
                              mean_hidden_ambiguity(hidden_conditional(model, data)),
                              oracle::mean_log_likelihood(model, data)};
  };
  const int trained_epochs = 2000;
  for (int e = 0; e < trained_epochs; ++e) {
    epoch(rbm, e, false);
  }
  Rbm control = rbm;
  const ForgettingSnapshot before = snapshot(rbm);
  for (int e = trained_epochs; e < trained_epochs + 100; ++e) {
    epoch(rbm, e, true);
    epoch(control, e, false);
  }
  const ForgettingSnapshot after = snapshot(rbm);
  const ForgettingSnapshot ctrl = snapshot(control);
  const double degradation = (before.ll - after.ll) / std::abs(before.ll);
  const bool pass =
      after.small > before.small && after.ambiguity < before.ambiguity && degradation < 0.1;
  return {pass,
          fmt::format("|W|<0.01 fraction {:.3f} -> {:.3f} (must rise), mean min(h,1-h) {:.4f} -> "
                      "{:.4f} (must fall), log-likelihood {:.4f} -> {:.4f} (loss {:.2f}% < 10%); "
                      "unpenalized control: {:.3f}, {:.4f}, {:.4f}",
                      before.small, after.small, before.ambiguity, after.ambiguity, before.ll,
                      after.ll, 100.0 * degradation, ctrl.small, ctrl.ambiguity, ctrl.ll)};
}

Outcome reproducibility() {
  const fs::path dir = fs::path(ADRBM_TEST_TMP) / "acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SynthCycleConfig sc;
  sc.dim = 6;
  sc.length = 12;
  sc.n_sequences = 20;
  sc.noise_flip_prob = 0.05;
  RngStream data_rng(5);
  const SequenceDataset ds = synth_cycle(sc, data_rng);
  write_jsonl(dir / "train.jsonl", ds.train);
  write_jsonl(dir / "test.jsonl", ds.test);

  int checks = 0;
  int failures = 0;
  for (ModelKind kind : {ModelKind::rnn_dbn, ModelKind::dbn}) {
    RunConfig cfg;
    cfg.kind = kind;
    cfg.seed = 11;
    cfg.train_path = dir / "train.jsonl";
    cfg.test_path = dir / "test.jsonl";
    cfg.train.n_hidden = 4;
    cfg.train.epochs = 6;
    cfg.train.cd.batch_size = 4;
    cfg.train.cd.learning_rate = 0.1;
    cfg.train.adapt.theta_G = 1e-6;
    cfg.train.layers.theta_L1 = 1e-9;
    cfg.train.layers.theta_L2 = 1e-9;
    cfg.train.layers.max_layers = 2;
    cfg.train.forget.forgetting_epochs = 2;
    cfg.train.forget.selective_epochs = 1;
    const fs::path full_a = dir / (std::string(to_string(kind)) + "_a");
    const fs::path full_b = dir / (std::string(to_string(kind)) + "_b");
    cfg.out_dir = full_a;
    (void)run_train(TrainRequest{cfg, {}, -1});
    cfg.out_dir = full_b;
    (void)run_train(TrainRequest{cfg, {}, -1});
    ++checks;
    failures += read_file(full_a / kRunLogFile) != read_file(full_b / kRunLogFile) ? 1 : 0;
    ++checks;
    failures +=
        read_file(full_a / kRunCheckpointFile) != read_file(full_b / kRunCheckpointFile) ? 1 : 0;
    for (int cut : {1, 5, 6, 7}) {
      cfg.out_dir = dir / fmt::format("{}_cut{}", to_string(kind), cut);
      (void)run_train(TrainRequest{cfg, {}, cut});
      const Checkpoint ckpt = load_checkpoint(cfg.out_dir / kRunCheckpointFile);
      const fs::path saved = dir / "saved.ckpt";
      save_checkpoint(ckpt, saved);
      (void)run_train(TrainRequest{cfg, saved, -1});
      ++checks;
      failures += read_file(cfg.out_dir / kRunLogFile) != read_file(full_a / kRunLogFile) ? 1 : 0;
      ++checks;
      failures += read_file(cfg.out_dir / kRunCheckpointFile) !=
                          read_file(full_a / kRunCheckpointFile)
                      ? 1
                      : 0;
    }
  }
  return {failures == 0,
          fmt::format("{} of {} byte comparisons identical (repeat runs and resumes)",
                      checks - failures, checks)};
}

bool same_model(const RnnRbm& a, const RnnRbm& b) {
  const auto eq = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return eq(a.base.b, b.base.b) && eq(a.base.c, b.base.c) && eq(a.base.W, b.base.W) &&
         eq(a.u_bias, b.u_bias) && eq(a.W_uv, b.W_uv) && eq(a.W_uh, b.W_uh) &&
         eq(a.W_vu, b.W_vu) && eq(a.W_uu, b.W_uu) && eq(a.u0, b.u0);
}

// Plain mini-batch BPTT loop with no structural branches.
RnnRbm traditional_loop(std::span<const Matrix> seqs, const TrainConfig& cfg,
                        const RngStream& root) {
  const RngStream layer = root.split(1);
  RngStream init = layer.split(0);
  RnnRbm model = RnnRbm::initialized(seqs.front().cols(), cfg.n_hidden, cfg.n_hidden, init);
  for (int e = 1; e <= cfg.epochs; ++e) {
    const RngStream er = layer.split(static_cast<std::uint64_t>(e));
    RngStream shuffle = er.split(0);
    const std::vector<std::size_t> order = permutation(seqs.size(), shuffle);
    std::uint64_t b = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.cd.batch_size)) {
      std::vector<Matrix> batch;
      for (std::size_t r = s; r < std::min(order.size(), s + cfg.cd.batch_size); ++r) {
        batch.push_back(seqs[order[r]]);
      }
      RnnRbmGradient g = bptt_gradients(model, batch, cfg.cd, er.split(++b));
      clip_gradient(g, cfg.clip_norm);
      apply_update(model, g, cfg.cd.learning_rate);
    }
  }
  return model;
}

Outcome baseline_reduction() {
  RngStream data_rng(9);
  SynthCycleConfig sc = cycle_data();
  sc.n_sequences = 20;
  const SequenceDataset ds = synth_cycle(sc, data_rng);
  const auto train = ds.train_frames();
  TrainConfig cfg = scenario_config();
  cfg.epochs = 30;
  cfg.cd.batch_size = 3;
  cfg.adaptive = false;
  const RngStream root(9);
  const RnnRbmResult disabled = train_adaptive_rnn_rbm(train, cfg, root);
  const RnnRbm reference = traditional_loop(train, cfg, root);

  TrainConfig inert = cfg;
  inert.adaptive = true;
  inert.adapt.theta_G = std::numeric_limits<double>::max();
  inert.adapt.theta_A = 0.0;
  inert.forget.forgetting_epochs = 0;
  inert.forget.selective_epochs = 0;
  const RnnRbmResult inert_run = train_adaptive_rnn_rbm(train, inert, root);

  const bool a = same_model(disabled.model, reference);
  const bool b = same_model(inert_run.model, reference);
  bool logs = disabled.log.rows.size() == inert_run.log.rows.size();
  for (std::size_t i = 0; logs && i < disabled.log.rows.size(); ++i) {
    logs = disabled.log.rows[i].error == inert_run.log.rows[i].error &&
           disabled.log.rows[i].events.empty() && inert_run.log.rows[i].events.empty();
  }
  return {a && b && logs,
          fmt::format("adaptive=false vs plain loop: {}; inert thresholds vs plain loop: {}; "
                      "per-epoch errors equal: {}",
                      a ? "bit-identical" : "differs", b ? "bit-identical" : "differs",
                      logs ? "yes" : "no")};
}

} // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"exact likelihood gradient", exact_gradient_oracle},
      {"distribution correctness", distribution_correctness},
      {"BPTT gradient", bptt_correctness},
      {"trigger rule tables", trigger_rules},
      {"structural dynamics", structural_dynamics},
      {"adaptive vs fixed", adaptive_beats_fixed},
      {"depth direction", depth_direction},
      {"forgetting effect", forgetting_effect},
      {"reproducibility and persistence", reproducibility},
      {"baseline reduction", baseline_reduction},
  };
  int failed = 0;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failed += out.pass ? 0 : 1;
    std::printf("%s %2d %s: %s\n", out.pass ? "PASS" : "FAIL", index, c.name, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
