#pragma once

#include <cstdint>

#include "adrbm/numerics.hpp"

namespace adrbm {

/// Largest I + J accepted by the exact enumeration routines.
inline constexpr Index kMaxEnumerationUnits = 24;

/// Binary-binary restricted Boltzmann machine with parameters {b, c, W}.
///
/// W is stored I x J: row i holds the weights of visible unit i.
struct Rbm {
  Vector b; ///< visible bias, length I
  Vector c; ///< hidden bias, length J
  Matrix W; ///< weights, I x J

  [[nodiscard]] Index n_visible() const { return b.size(); }
  [[nodiscard]] Index n_hidden() const { return c.size(); }

  /// All-zero parameters.
  static Rbm zeros(Index n_visible, Index n_hidden);
  /// Zero biases, weights drawn from N(0, 0.01^2).
  static Rbm initialized(Index n_visible, Index n_hidden, RngStream& rng);

  /// Throws DimensionError if b, c and W disagree.
  void check_dims() const;
  [[nodiscard]] bool finite() const;
};

struct CdConfig {
  int k = 1;
  double learning_rate = 0.01;
  int batch_size = 100;

  void validate() const;
};

/// Gradient (or parameter delta) over {b, c, W}. Produced in the ascent
/// direction: theta += learning_rate * gradient increases the likelihood.
struct RbmGradient {
  Vector db;
  Vector dc;
  Matrix dW;

  static RbmGradient zeros(Index n_visible, Index n_hidden);
  RbmGradient& operator+=(const RbmGradient& other);
  RbmGradient& operator*=(double s);
  [[nodiscard]] double squared_norm() const;
};

/// Applies theta += scale * g.
void apply_update(Rbm& rbm, const RbmGradient& g, double scale);

double energy(const Rbm& rbm, const Vector& v, const Vector& h);

/// F(v) = -b.v - sum_j softplus(c_j + (v W)_j), so p(v) = exp(-F(v)) / Z.
double free_energy(const Rbm& rbm, const Vector& v);

/// Z summed over all 2^(I+J) joint states. Throws CapacityError past the guard.
double partition_function_exact(const Rbm& rbm);
double log_partition_exact(const Rbm& rbm);

double prob_exact(const Rbm& rbm, const Vector& v, const Vector& h);

/// p(v) for every visible configuration; entry `code` is the state whose
/// bit i is v_i.
Vector visible_distribution_exact(const Rbm& rbm);

/// Mean over batch rows of log p(v).
double mean_log_likelihood_exact(const Rbm& rbm, const Matrix& batch);

/// Exact gradient of the mean batch log-likelihood.
RbmGradient log_likelihood_gradient_exact(const Rbm& rbm, const Matrix& batch);

/// p(h_j = 1 | v) = sigmoid(c_j + sum_i v_i W_ij).
Vector hidden_conditional(const Rbm& rbm, const Vector& v);
/// Row-wise version: N x I -> N x J.
Matrix hidden_conditional(const Rbm& rbm, const Matrix& batch);

/// p(v_i = 1 | h) = sigmoid(b_i + sum_j W_ij h_j).
Vector visible_conditional(const Rbm& rbm, const Vector& h);
Matrix visible_conditional(const Rbm& rbm, const Matrix& hidden);

/// Statistics of a CD-k chain started at the data. Biases are given per row
/// so the same routine serves models whose biases vary by time step.
struct CdChain {
  Matrix v0;  ///< data, N x I
  Matrix ph0; ///< p(h | v0), N x J
  Matrix vk;  ///< visible sample after k steps, N x I
  Matrix phk; ///< p(h | vk), N x J
};

CdChain run_cd_chain(const Matrix& W, const Matrix& visible_bias,
                     const Matrix& hidden_bias, const Matrix& data, int k,
                     RngStream& rng);

/// CD-k gradient estimate averaged over the batch. The model is not touched.
RbmGradient cd_step(const Rbm& rbm, const Matrix& batch, const CdConfig& cfg,
                    RngStream& rng);

/// Mean over rows of E(v, p(h|v)), i.e. the energy averaged over p(h|v).
double mean_energy(const Rbm& rbm, const Matrix& data);

/// Binary vector of length n with bit i of `code` in position i.
Vector binary_state(std::uint64_t code, Index n);

} // namespace adrbm
