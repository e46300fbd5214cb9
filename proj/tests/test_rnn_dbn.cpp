#include "doctest.h"

#include "adrbm/errors.hpp"
#include "adrbm/rnn_dbn.hpp"
#include "oracles.hpp"

using namespace adrbm;

TEST_SUITE("rnn_dbn") {

TEST_CASE("single-layer stack predicts like the layer") {
  RngStream rng(1);
  RnnDbn dbn;
  dbn.layers.push_back(oracle::random_rnn_rbm(4, 3, 2, 1.0, rng));
  const Matrix prefix = oracle::random_binary(3, 4, rng);
  CHECK(predict_next_deep(dbn, prefix) == predict_next(dbn.layers[0], prefix));
  CHECK(predict_next_deep(dbn, Matrix(0, 4)) == predict_next(dbn.layers[0], Matrix(0, 4)));
}

TEST_CASE("zero stack predicts one half") {
  RnnDbn dbn;
  dbn.layers.push_back(RnnRbm::zeros(4, 3, 3));
  dbn.layers.push_back(RnnRbm::zeros(3, 3, 3));
  const Vector p = predict_next_deep(dbn, Matrix::Ones(2, 4));
  CHECK(p == Vector::Constant(4, 0.5));
}

TEST_CASE("two-layer prediction against the enumerated top marginal") {
  RngStream rng(2);
  for (int trial = 0; trial < 4; ++trial) {
    RnnDbn dbn;
    dbn.layers.push_back(oracle::random_rnn_rbm(4, 3, 2, 0.5, rng));
    dbn.layers.push_back(oracle::random_rnn_rbm(3, 3, 2, 0.5, rng));
    const Matrix prefix = oracle::random_binary(3, 4, rng);
    const RnnRbm& bottom = dbn.layers[0];
    const RnnRbm& top = dbn.layers[1];

    // Layer-1 input: deterministic hidden rows of the bottom layer.
    const auto u_bottom = oracle::states(bottom, prefix);
    Matrix hidden(prefix.rows(), 3);
    for (Index t = 0; t < prefix.rows(); ++t) {
      const Vector c = oracle::hidden_bias_at(bottom, u_bottom[static_cast<std::size_t>(t)]);
      for (Index j = 0; j < 3; ++j) {
        double a = c[j];
        for (Index i = 0; i < 4; ++i) {
          a += prefix(t, i) * bottom.base.W(i, j);
        }
        hidden(t, j) = oracle::logistic(a);
      }
    }
    const auto u_top = oracle::states(top, hidden);
    const Vector top_marginal = oracle::model_visible_marginal(
        oracle::visible_bias_at(top, u_top.back()), oracle::hidden_bias_at(top, u_top.back()),
        top.base.W);
    // Down map through the bottom layer with its own next-step visible bias.
    const Vector b = oracle::visible_bias_at(bottom, u_bottom.back());
    Vector expected(4);
    for (Index i = 0; i < 4; ++i) {
      double a = b[i];
      for (Index j = 0; j < 3; ++j) {
        a += bottom.base.W(i, j) * top_marginal[j];
      }
      expected[i] = oracle::logistic(a);
    }
    CHECK((predict_next_deep(dbn, prefix) - expected).cwiseAbs().maxCoeff() < 0.05);
  }
}

TEST_CASE("propagated sequences chain the layers") {
  RngStream rng(3);
  RnnDbn dbn;
  dbn.layers.push_back(oracle::random_rnn_rbm(4, 3, 2, 1.0, rng));
  dbn.layers.push_back(oracle::random_rnn_rbm(3, 2, 2, 1.0, rng));
  const std::vector<Matrix> seqs{oracle::random_binary(5, 4, rng)};
  CHECK(propagate_sequences(dbn, seqs, 0)[0] == seqs[0]);
  const Matrix h1 = deterministic_hidden_sequence(dbn.layers[0], seqs[0]);
  CHECK(propagate_sequences(dbn, seqs, 1)[0] == h1);
  CHECK(propagate_sequences(dbn, seqs, 2)[0] ==
        deterministic_hidden_sequence(dbn.layers[1], h1));
}

TEST_CASE("inherited recurrent layer") {
  RngStream rng(4);
  const RnnRbm parent = oracle::random_rnn_rbm(5, 4, 3, 1.0, rng);
  const RnnRbm child = inherit_rnn_layer(parent, rng);
  CHECK(child.n_visible() == 4);
  CHECK(child.n_hidden() == 4);
  CHECK(child.state_dim() == 4);
  CHECK(child.base.b == parent.base.c);
  CHECK(child.base.c == parent.base.c);
  CHECK(child.u0.minCoeff() > 0.0);
  CHECK(child.u0.maxCoeff() < 1.0);
  CHECK(child.W_uu.cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("stack chain check") {
  RnnDbn dbn;
  dbn.layers.push_back(RnnRbm::zeros(4, 3, 2));
  dbn.layers.push_back(RnnRbm::zeros(2, 2, 2));
  CHECK_THROWS_AS(dbn.check_chain(), DimensionError);
}

TEST_CASE("layer growth follows the thresholds") {
  RngStream rng(5);
  std::vector<Matrix> seqs;
  for (int s = 0; s < 6; ++s) {
    seqs.push_back(oracle::random_binary(6, 4, rng));
  }
  TrainConfig cfg;
  cfg.n_hidden = 3;
  cfg.epochs = 4;
  cfg.cd.batch_size = 3;
  cfg.layers.max_layers = 3;

  SUBCASE("prohibitive") {
    cfg.layers.theta_L1 = 1e9;
    const RnnDbnResult r = train_adaptive_rnn_dbn(seqs, cfg, RngStream(1));
    CHECK(r.model.depth() == 1);
  }
  SUBCASE("permissive") {
    cfg.layers.theta_L1 = 1e-12;
    cfg.layers.theta_L2 = 1e-12;
    const RnnDbnResult r = train_adaptive_rnn_dbn(seqs, cfg, RngStream(1));
    CHECK(r.model.depth() == 3);
    CHECK(r.log.rows.size() == 12);
    CHECK_NOTHROW(r.model.check_chain());
    // Same seed, same layer boundaries.
    const RnnDbnResult again = train_adaptive_rnn_dbn(seqs, cfg, RngStream(1));
    for (std::size_t i = 0; i < r.log.rows.size(); ++i) {
      CHECK(format_log_row(r.log.rows[i]) == format_log_row(again.log.rows[i]));
    }
  }
}

TEST_CASE("first layer of the stack equals a standalone run") {
  RngStream rng(6);
  std::vector<Matrix> seqs;
  for (int s = 0; s < 4; ++s) {
    seqs.push_back(oracle::random_binary(6, 4, rng));
  }
  TrainConfig cfg;
  cfg.n_hidden = 3;
  cfg.epochs = 5;
  cfg.cd.batch_size = 2;
  cfg.layers.theta_L1 = 1e-12;
  cfg.layers.theta_L2 = 1e-12;
  cfg.layers.max_layers = 2;
  const RnnDbnResult deep = train_adaptive_rnn_dbn(seqs, cfg, RngStream(9));
  const RnnRbmResult single = train_adaptive_rnn_rbm(seqs, cfg, RngStream(9));
  CHECK(deep.model.layers[0].base.W == single.model.base.W);
  CHECK(deep.model.layers[0].W_uu == single.model.W_uu);
}

}
