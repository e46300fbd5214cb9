#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace adrbm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Counter-based generator: output n of a stream is a SplitMix64 finalizer
/// applied to (key + n * golden gamma). Each stream has period 2^64.
///
/// A stream is identified by its key alone, so split(i) derives a child key
/// from (key, i) without touching the parent's counter. Resuming a run only
/// needs the seed and the position in the epoch/batch schedule.
class RngStream {
public:
  static constexpr std::string_view algorithm_id = "splitmix64-ctr/1";

  explicit RngStream(std::uint64_t seed);

  /// Independent child stream keyed by (this key, index).
  [[nodiscard]] RngStream split(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

private:
  RngStream(std::uint64_t key, std::uint64_t counter, int /*tag*/)
      : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

/// Logistic function, clamped so the result is strictly inside (0, 1).
double sigmoid(double x);
Vector sigmoid(const Vector& x);
Matrix sigmoid(const Matrix& x);

/// log(1 + e^x) without overflow.
double softplus(double x);

/// Each output bit is 1 with probability p_i.
Vector sample_bernoulli(const Vector& p, RngStream& rng);
Matrix sample_bernoulli(const Matrix& p, RngStream& rng);

Matrix gaussian_matrix(Index rows, Index cols, double sd, RngStream& rng);
Vector gaussian_vector(Index n, double sd, RngStream& rng);

/// sign with sign(0) = 0.
double sign0(double x);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, RngStream& rng);

/// Mean over rows of the summed binary cross-entropy between targets and
/// predicted probabilities (nats per row).
double mean_row_cross_entropy(const Matrix& target, const Matrix& prob);

// Structural editing helpers. `keep` masks are true for entries that survive.
Vector insert_entry(const Vector& v, Index pos, double value);
Matrix insert_col(const Matrix& m, Index pos, const Vector& col);
Matrix insert_row(const Matrix& m, Index pos, const Vector& row);
Vector keep_entries(const Vector& v, const std::vector<bool>& keep);
Matrix keep_cols(const Matrix& m, const std::vector<bool>& keep);
Matrix keep_rows(const Matrix& m, const std::vector<bool>& keep);

} // namespace adrbm
