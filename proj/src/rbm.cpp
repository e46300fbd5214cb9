#include "adrbm/rbm.hpp"

#include <cmath>
#include <string>

#include "adrbm/errors.hpp"

namespace adrbm {

namespace {

void expect_visible(const Rbm& rbm, Index got) {
  if (got != rbm.n_visible()) {
    throw DimensionError("visible axis mismatch: model has I=" +
                         std::to_string(rbm.n_visible()) + ", input has " +
                         std::to_string(got));
  }
}

void expect_hidden(const Rbm& rbm, Index got) {
  if (got != rbm.n_hidden()) {
    throw DimensionError("hidden axis mismatch: model has J=" +
                         std::to_string(rbm.n_hidden()) + ", input has " +
                         std::to_string(got));
  }
}

void guard_enumeration(const Rbm& rbm) {
  if (rbm.n_visible() + rbm.n_hidden() > kMaxEnumerationUnits) {
    throw CapacityError("exact enumeration limited to I+J <= " +
                        std::to_string(kMaxEnumerationUnits) + ", got I+J=" +
                        std::to_string(rbm.n_visible() + rbm.n_hidden()));
  }
}

double log_sum_exp(const Vector& x) {
  if (x.size() == 0) {
    return -INFINITY;
  }
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

// -F(v) for every visible state.
Vector negative_free_energies(const Rbm& rbm) {
  const Index n = rbm.n_visible();
  const std::uint64_t states = std::uint64_t{1} << n;
  Vector out(static_cast<Index>(states));
  for (std::uint64_t code = 0; code < states; ++code) {
    out[static_cast<Index>(code)] = -free_energy(rbm, binary_state(code, n));
  }
  return out;
}

} // namespace

Rbm Rbm::zeros(Index n_visible, Index n_hidden) {
  return Rbm{Vector::Zero(n_visible), Vector::Zero(n_hidden),
             Matrix::Zero(n_visible, n_hidden)};
}

Rbm Rbm::initialized(Index n_visible, Index n_hidden, RngStream& rng) {
  Rbm rbm = zeros(n_visible, n_hidden);
  rbm.W = gaussian_matrix(n_visible, n_hidden, 0.01, rng);
  return rbm;
}

void Rbm::check_dims() const {
  if (W.rows() != b.size()) {
    throw DimensionError("visible axis mismatch: b has " + std::to_string(b.size()) +
                         " entries, W has " + std::to_string(W.rows()) + " rows");
  }
  if (W.cols() != c.size()) {
    throw DimensionError("hidden axis mismatch: c has " + std::to_string(c.size()) +
                         " entries, W has " + std::to_string(W.cols()) + " columns");
  }
}

bool Rbm::finite() const { return b.allFinite() && c.allFinite() && W.allFinite(); }

void CdConfig::validate() const {
  if (k < 1) {
    throw ConfigError("cd k must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw ConfigError("learning rate must be > 0");
  }
  if (batch_size < 1) {
    throw ConfigError("batch size must be >= 1");
  }
}

RbmGradient RbmGradient::zeros(Index n_visible, Index n_hidden) {
  return RbmGradient{Vector::Zero(n_visible), Vector::Zero(n_hidden),
                     Matrix::Zero(n_visible, n_hidden)};
}

RbmGradient& RbmGradient::operator+=(const RbmGradient& other) {
  db += other.db;
  dc += other.dc;
  dW += other.dW;
  return *this;
}

RbmGradient& RbmGradient::operator*=(double s) {
  db *= s;
  dc *= s;
  dW *= s;
  return *this;
}

double RbmGradient::squared_norm() const {
  return db.squaredNorm() + dc.squaredNorm() + dW.squaredNorm();
}

void apply_update(Rbm& rbm, const RbmGradient& g, double scale) {
  rbm.b += scale * g.db;
  rbm.c += scale * g.dc;
  rbm.W += scale * g.dW;
}

double energy(const Rbm& rbm, const Vector& v, const Vector& h) {
  expect_visible(rbm, v.size());
  expect_hidden(rbm, h.size());
  return -rbm.b.dot(v) - rbm.c.dot(h) - v.dot(rbm.W * h);
}

double free_energy(const Rbm& rbm, const Vector& v) {
  expect_visible(rbm, v.size());
  const Vector act = rbm.c + rbm.W.transpose() * v;
  double f = -rbm.b.dot(v);
  for (Index j = 0; j < act.size(); ++j) {
    f -= softplus(act[j]);
  }
  return f;
}

double log_partition_exact(const Rbm& rbm) {
  guard_enumeration(rbm);
  return log_sum_exp(negative_free_energies(rbm));
}

double partition_function_exact(const Rbm& rbm) {
  return std::exp(log_partition_exact(rbm));
}

double prob_exact(const Rbm& rbm, const Vector& v, const Vector& h) {
  const double log_z = log_partition_exact(rbm);
  return std::exp(-energy(rbm, v, h) - log_z);
}

Vector visible_distribution_exact(const Rbm& rbm) {
  guard_enumeration(rbm);
  const Vector nf = negative_free_energies(rbm);
  const double log_z = log_sum_exp(nf);
  return (nf.array() - log_z).exp().matrix();
}

double mean_log_likelihood_exact(const Rbm& rbm, const Matrix& batch) {
  if (batch.rows() == 0) {
    throw DataError("empty batch");
  }
  expect_visible(rbm, batch.cols());
  const double log_z = log_partition_exact(rbm);
  double total = 0.0;
  for (Index n = 0; n < batch.rows(); ++n) {
    total += -free_energy(rbm, batch.row(n).transpose()) - log_z;
  }
  return total / static_cast<double>(batch.rows());
}

RbmGradient log_likelihood_gradient_exact(const Rbm& rbm, const Matrix& batch) {
  if (batch.rows() == 0) {
    throw DataError("empty batch");
  }
  expect_visible(rbm, batch.cols());
  const Index I = rbm.n_visible();
  const Index J = rbm.n_hidden();

  // Data term.
  const Matrix ph_data = hidden_conditional(rbm, batch);
  const double inv_n = 1.0 / static_cast<double>(batch.rows());
  RbmGradient g{batch.colwise().mean().transpose(), ph_data.colwise().mean().transpose(),
                batch.transpose() * ph_data * inv_n};

  // Model term, enumerated over visible states.
  const Vector p = visible_distribution_exact(rbm);
  RbmGradient model = RbmGradient::zeros(I, J);
  for (Index code = 0; code < p.size(); ++code) {
    const Vector v = binary_state(static_cast<std::uint64_t>(code), I);
    const Vector ph = hidden_conditional(rbm, v);
    model.db += p[code] * v;
    model.dc += p[code] * ph;
    model.dW += p[code] * v * ph.transpose();
  }
  g.db -= model.db;
  g.dc -= model.dc;
  g.dW -= model.dW;
  return g;
}

Vector hidden_conditional(const Rbm& rbm, const Vector& v) {
  expect_visible(rbm, v.size());
  return sigmoid(Vector(rbm.c + rbm.W.transpose() * v));
}

Matrix hidden_conditional(const Rbm& rbm, const Matrix& batch) {
  expect_visible(rbm, batch.cols());
  Matrix act = batch * rbm.W;
  act.rowwise() += rbm.c.transpose();
  return sigmoid(act);
}

Vector visible_conditional(const Rbm& rbm, const Vector& h) {
  expect_hidden(rbm, h.size());
  return sigmoid(Vector(rbm.b + rbm.W * h));
}

Matrix visible_conditional(const Rbm& rbm, const Matrix& hidden) {
  expect_hidden(rbm, hidden.cols());
  Matrix act = hidden * rbm.W.transpose();
  act.rowwise() += rbm.b.transpose();
  return sigmoid(act);
}

CdChain run_cd_chain(const Matrix& W, const Matrix& visible_bias,
                     const Matrix& hidden_bias, const Matrix& data, int k,
                     RngStream& rng) {
  CdChain chain;
  chain.v0 = data;
  chain.ph0 = sigmoid(Matrix(data * W + hidden_bias));
  Matrix h = sample_bernoulli(chain.ph0, rng);
  Matrix v;
  Matrix ph;
  for (int step = 0; step < k; ++step) {
    v = sample_bernoulli(sigmoid(Matrix(h * W.transpose() + visible_bias)), rng);
    ph = sigmoid(Matrix(v * W + hidden_bias));
    if (step + 1 < k) {
      h = sample_bernoulli(ph, rng);
    }
  }
  chain.vk = std::move(v);
  chain.phk = std::move(ph);
  return chain;
}

RbmGradient cd_step(const Rbm& rbm, const Matrix& batch, const CdConfig& cfg,
                    RngStream& rng) {
  if (batch.rows() == 0) {
    throw DataError("cd_step: empty batch");
  }
  expect_visible(rbm, batch.cols());
  cfg.validate();
  const Index n = batch.rows();
  const Matrix vis_bias = rbm.b.transpose().replicate(n, 1);
  const Matrix hid_bias = rbm.c.transpose().replicate(n, 1);
  const CdChain chain = run_cd_chain(rbm.W, vis_bias, hid_bias, batch, cfg.k, rng);

  const double inv_n = 1.0 / static_cast<double>(n);
  return RbmGradient{
      (chain.v0 - chain.vk).colwise().mean().transpose(),
      (chain.ph0 - chain.phk).colwise().mean().transpose(),
      (chain.v0.transpose() * chain.ph0 - chain.vk.transpose() * chain.phk) * inv_n};
}

double mean_energy(const Rbm& rbm, const Matrix& data) {
  if (data.rows() == 0) {
    throw DataError("mean_energy: empty data");
  }
  const Matrix ph = hidden_conditional(rbm, data);
  double total = 0.0;
  for (Index n = 0; n < data.rows(); ++n) {
    total += energy(rbm, data.row(n).transpose(), ph.row(n).transpose());
  }
  return total / static_cast<double>(data.rows());
}

Vector binary_state(std::uint64_t code, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    v[i] = static_cast<double>((code >> i) & 1U);
  }
  return v;
}

} // namespace adrbm
