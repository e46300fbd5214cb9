#include <cmath>

#include "doctest.h"

#include "adrbm/dbn.hpp"
#include "adrbm/errors.hpp"
#include "oracles.hpp"

using namespace adrbm;

namespace {

std::vector<LayerTotals> totals(std::initializer_list<std::pair<double, double>> xs) {
  std::vector<LayerTotals> out;
  for (auto [wd, e] : xs) {
    out.push_back({wd, e});
  }
  return out;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.n_hidden = 4;
  cfg.epochs = 6;
  cfg.cd.batch_size = 10;
  cfg.cd.learning_rate = 0.1;
  return cfg;
}

} // namespace

TEST_SUITE("dbn") {

TEST_CASE("layer totals of a zero model have zero energy") {
  GradientStats s = GradientStats::zeros(3, 2, 0.9);
  update_stats(s, Vector::Constant(2, 0.1), Matrix::Constant(3, 2, 0.1));
  RngStream rng(1);
  const LayerTotals t = layer_totals(s, Rbm::zeros(3, 2), oracle::random_binary(5, 3, rng));
  CHECK(t.energy == 0.0);
  CHECK(t.wd == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("layer totals energy equals the recomputed mean energy") {
  RngStream rng(2);
  const Rbm m = oracle::random_rbm(3, 2, 1.0, rng);
  const Matrix data = oracle::random_binary(6, 3, rng);
  GradientStats s = GradientStats::zeros(3, 2, 0.9);
  update_stats(s, Vector::Constant(2, 0.1), Matrix::Constant(3, 2, 0.1));
  double ref = 0.0;
  for (Index n = 0; n < data.rows(); ++n) {
    const Vector v = data.row(n).transpose();
    const Vector ph = oracle::hidden_marginal(m, v);
    ref += -m.b.dot(v) - m.c.dot(ph) - v.dot(m.W * ph);
  }
  CHECK(layer_totals(s, m, data).energy == doctest::Approx(ref / 6.0).epsilon(1e-12));
}

TEST_CASE("layer totals with constant gradients") {
  GradientStats s = GradientStats::zeros(2, 2, 0.9);
  for (int n = 0; n < 300; ++n) {
    update_stats(s, Vector::Constant(2, 0.2), Matrix::Constant(2, 2, -0.1));
  }
  CHECK(layer_totals(s, Rbm::zeros(2, 2), Matrix::Zero(1, 2)).wd < 1e-12);
}

TEST_CASE("layer totals require training") {
  CHECK_THROWS_AS(
      (void)layer_totals(GradientStats::zeros(2, 2, 0.9), Rbm::zeros(2, 2), Matrix::Zero(1, 2)),
      Error);
}

TEST_CASE("layer generation decision table at the default thresholds") {
  LayerGenConfig cfg;
  REQUIRE(cfg.theta_L1 == 0.01);
  REQUIRE(cfg.theta_L2 == 0.01);
  cfg.max_layers = 3;
  struct Row {
    std::vector<LayerTotals> t;
    bool grow;
  };
  const Row table[] = {
      {totals({{0.02, 0.02}}), true},
      {totals({{0.0, 5.0}}), false},                 // WD sum zero
      {totals({{0.02, 0.0}}), false},                // energy sum zero
      {totals({{0.01, 0.02}}), false},               // WD exactly at threshold
      {totals({{0.02, 0.01}}), false},               // energy exactly at threshold
      {totals({{0.005, 0.02}, {0.005, 0.0}}), false}, // summed WD 0.01, not above
      {totals({{0.006, 0.006}, {0.005, 0.005}}), true},
      {totals({{0.02, -0.02}}), true},               // energy by magnitude
      {totals({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}), false}, // at max_layers
  };
  for (const Row& r : table) {
    CHECK(layer_generation_condition(r.t, cfg) == r.grow);
  }
  CHECK_FALSE(layer_generation_condition({}, cfg));
}

TEST_CASE("layer generation weights") {
  LayerGenConfig cfg;
  cfg.alpha_WD = 0.5;
  const auto t = totals({{0.03, 0.02}});
  CHECK(layer_generation_condition(t, cfg));
  cfg.alpha_WD = 0.25;
  CHECK_FALSE(layer_generation_condition(t, cfg));
}

TEST_CASE("generated layer inherits from its parent") {
  RngStream rng(3);
  Dbn dbn;
  dbn.layers.push_back(oracle::random_rbm(5, 42, 1.0, rng));
  LayerGenConfig cfg;
  generate_layer(dbn, cfg, rng);
  REQUIRE(dbn.depth() == 2);
  const Rbm& top = dbn.layers[1];
  CHECK(top.n_visible() == 42);
  CHECK(top.n_hidden() == 42);
  CHECK(top.b == dbn.layers[0].c);
  CHECK(top.c == dbn.layers[0].c);
  CHECK(top.W.cwiseAbs().maxCoeff() < 0.1);
  CHECK(top.W.cwiseAbs().maxCoeff() > 0.0);
  CHECK_NOTHROW(dbn.check_chain());
}

TEST_CASE("generate_layer at capacity") {
  RngStream rng(4);
  Dbn dbn;
  dbn.layers.push_back(Rbm::zeros(3, 3));
  LayerGenConfig cfg;
  cfg.max_layers = 1;
  CHECK_THROWS_AS(generate_layer(dbn, cfg, rng), CapacityError);
}

TEST_CASE("propagate_up base cases") {
  RngStream rng(5);
  const Rbm m = oracle::random_rbm(4, 3, 1.0, rng);
  const Matrix data = oracle::random_binary(6, 4, rng);
  Dbn one;
  one.layers.push_back(m);
  CHECK(propagate_up(one, data) == hidden_conditional(m, data));

  Dbn zero;
  zero.layers.push_back(Rbm::zeros(4, 3));
  zero.layers.push_back(Rbm::zeros(3, 2));
  CHECK(propagate_up(zero, data) == Matrix::Constant(6, 2, 0.5));
}

TEST_CASE("propagate_up composes the conditionals") {
  RngStream rng(6);
  Dbn dbn;
  dbn.layers.push_back(oracle::random_rbm(4, 3, 1.0, rng));
  dbn.layers.push_back(oracle::random_rbm(3, 3, 1.0, rng));
  dbn.layers.push_back(oracle::random_rbm(3, 2, 1.0, rng));
  const Matrix data = oracle::random_binary(5, 4, rng);
  const Matrix out = propagate_up(dbn, data);
  for (Index n = 0; n < data.rows(); ++n) {
    Vector x = data.row(n).transpose();
    for (const auto& layer : dbn.layers) {
      Vector h(layer.n_hidden());
      for (Index j = 0; j < layer.n_hidden(); ++j) {
        double a = layer.c[j];
        for (Index i = 0; i < layer.n_visible(); ++i) {
          a += x[i] * layer.W(i, j);
        }
        h[j] = oracle::logistic(a);
      }
      x = h;
    }
    CHECK((out.row(n).transpose() - x).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK(out.minCoeff() > 0.0);
  CHECK(out.maxCoeff() < 1.0);
}

TEST_CASE("propagate_up rejects a width mismatch") {
  Dbn dbn;
  dbn.layers.push_back(Rbm::zeros(4, 3));
  CHECK_THROWS_AS((void)propagate_up(dbn, Matrix::Zero(2, 5)), DimensionError);
}

TEST_CASE("prohibitive thresholds give one layer") {
  RngStream rng(7);
  const Matrix data = oracle::random_binary(40, 6, rng);
  TrainConfig cfg = small_config();
  cfg.layers.theta_L1 = 1e9;
  const DbnResult r = train_adaptive_dbn(data, cfg, RngStream(1));
  CHECK(r.dbn.depth() == 1);
  CHECK(r.log.rows.size() == 6);
}

TEST_CASE("permissive thresholds grow to the cap") {
  RngStream rng(8);
  const Matrix data = oracle::random_binary(40, 6, rng);
  TrainConfig cfg = small_config();
  cfg.layers.theta_L1 = 1e-12;
  cfg.layers.theta_L2 = 1e-12;
  cfg.layers.max_layers = 3;
  const DbnResult r = train_adaptive_dbn(data, cfg, RngStream(1));
  CHECK(r.dbn.depth() == 3);
  CHECK(r.log.rows.size() == 18);
  CHECK_NOTHROW(r.dbn.check_chain());
  // Rows ordered by (layer, epoch), layer count never decreasing.
  for (std::size_t i = 1; i < r.log.rows.size(); ++i) {
    const auto& a = r.log.rows[i - 1];
    const auto& b = r.log.rows[i];
    CHECK((a.layer < b.layer || (a.layer == b.layer && a.epoch < b.epoch)));
    CHECK(a.n_layers <= b.n_layers);
  }
  int add_events = 0;
  for (const auto& row : r.log.rows) {
    for (const auto& e : row.events) {
      add_events += e.kind == StructureEvent::Kind::add_layer ? 1 : 0;
    }
  }
  CHECK(add_events == 2);
}

TEST_CASE("dbn training is deterministic") {
  RngStream rng(9);
  const Matrix data = oracle::random_binary(30, 5, rng);
  TrainConfig cfg = small_config();
  cfg.layers.theta_L1 = 1e-12;
  cfg.layers.theta_L2 = 1e-12;
  cfg.layers.max_layers = 2;
  const DbnResult a = train_adaptive_dbn(data, cfg, RngStream(4));
  const DbnResult b = train_adaptive_dbn(data, cfg, RngStream(4));
  REQUIRE(a.log.rows.size() == b.log.rows.size());
  for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
    CHECK(format_log_row(a.log.rows[i]) == format_log_row(b.log.rows[i]));
  }
  CHECK(a.dbn.layers.back().W == b.dbn.layers.back().W);
}

TEST_CASE("non-adaptive stacks have fixed depth") {
  RngStream rng(10);
  const Matrix data = oracle::random_binary(30, 5, rng);
  TrainConfig cfg = small_config();
  cfg.adaptive = false;
  cfg.layers.max_layers = 2;
  cfg.layers.theta_L1 = 1e9;
  const DbnResult r = train_adaptive_dbn(data, cfg, RngStream(2));
  CHECK(r.dbn.depth() == 2);
  for (const auto& row : r.log.rows) {
    for (const auto& e : row.events) {
      CHECK(e.kind == StructureEvent::Kind::add_layer);
    }
  }
}

}
