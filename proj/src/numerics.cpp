#include "adrbm/numerics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <vector>

namespace adrbm {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
constexpr double kTwoPi = 6.283185307179586476925286766559;

// 1/(1+e^-x) rounds to exactly 1.0 in double precision once x > ~36.7;
// clamping the argument keeps the result strictly inside (0, 1).
constexpr double kSigmoidClamp = 36.0;

} // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed) : key_(mix64(seed ^ 0x6A09E667F3BCC908ULL)) {}

RngStream RngStream::split(std::uint64_t index) const {
  const std::uint64_t child = mix64(key_ ^ mix64(index * kGamma + 0xD1B54A32D192ED03ULL));
  return RngStream(child, 0, 0);
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  assert(n > 0);
  // Reject the low range so the modulo is unbiased.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) {
      return r % n;
    }
  }
}

double sigmoid(double x) {
  assert(std::isfinite(x));
  if (x > kSigmoidClamp) {
    x = kSigmoidClamp;
  } else if (x < -kSigmoidClamp * 20.0) {
    x = -kSigmoidClamp * 20.0;
  }
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

double softplus(double x) {
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(x));
}

Vector sample_bernoulli(const Vector& p, RngStream& rng) {
  Vector out(p.size());
  for (Index i = 0; i < p.size(); ++i) {
    out[i] = rng.uniform() < p[i] ? 1.0 : 0.0;
  }
  return out;
}

Matrix sample_bernoulli(const Matrix& p, RngStream& rng) {
  Matrix out(p.rows(), p.cols());
  // Row-major traversal so the draw order matches per-row sampling.
  for (Index r = 0; r < p.rows(); ++r) {
    for (Index c = 0; c < p.cols(); ++c) {
      out(r, c) = rng.uniform() < p(r, c) ? 1.0 : 0.0;
    }
  }
  return out;
}

Matrix gaussian_matrix(Index rows, Index cols, double sd, RngStream& rng) {
  Matrix out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      out(r, c) = sd * rng.normal();
    }
  }
  return out;
}

Vector gaussian_vector(Index n, double sd, RngStream& rng) {
  Vector out(n);
  for (Index i = 0; i < n; ++i) {
    out[i] = sd * rng.normal();
  }
  return out;
}

double sign0(double x) {
  if (x > 0.0) {
    return 1.0;
  }
  if (x < 0.0) {
    return -1.0;
  }
  return 0.0;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

std::vector<std::size_t> permutation(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

double mean_row_cross_entropy(const Matrix& target, const Matrix& prob) {
  assert(target.rows() == prob.rows() && target.cols() == prob.cols());
  if (target.rows() == 0) {
    return 0.0;
  }
  double total = 0.0;
  for (Index r = 0; r < target.rows(); ++r) {
    for (Index c = 0; c < target.cols(); ++c) {
      const double p = prob(r, c);
      const double t = target(r, c);
      total -= t * std::log(p) + (1.0 - t) * std::log1p(-p);
    }
  }
  return total / static_cast<double>(target.rows());
}

Vector insert_entry(const Vector& v, Index pos, double value) {
  Vector out(v.size() + 1);
  out.head(pos) = v.head(pos);
  out[pos] = value;
  out.tail(v.size() - pos) = v.tail(v.size() - pos);
  return out;
}

Matrix insert_col(const Matrix& m, Index pos, const Vector& col) {
  Matrix out(m.rows(), m.cols() + 1);
  out.leftCols(pos) = m.leftCols(pos);
  out.col(pos) = col;
  out.rightCols(m.cols() - pos) = m.rightCols(m.cols() - pos);
  return out;
}

Matrix insert_row(const Matrix& m, Index pos, const Vector& row) {
  Matrix out(m.rows() + 1, m.cols());
  out.topRows(pos) = m.topRows(pos);
  out.row(pos) = row.transpose();
  out.bottomRows(m.rows() - pos) = m.bottomRows(m.rows() - pos);
  return out;
}

namespace {

Index count_kept(const std::vector<bool>& keep) {
  return static_cast<Index>(std::count(keep.begin(), keep.end(), true));
}

} // namespace

Vector keep_entries(const Vector& v, const std::vector<bool>& keep) {
  assert(static_cast<Index>(keep.size()) == v.size());
  Vector out(count_kept(keep));
  Index k = 0;
  for (Index i = 0; i < v.size(); ++i) {
    if (keep[static_cast<std::size_t>(i)]) {
      out[k++] = v[i];
    }
  }
  return out;
}

Matrix keep_cols(const Matrix& m, const std::vector<bool>& keep) {
  assert(static_cast<Index>(keep.size()) == m.cols());
  Matrix out(m.rows(), count_kept(keep));
  Index k = 0;
  for (Index j = 0; j < m.cols(); ++j) {
    if (keep[static_cast<std::size_t>(j)]) {
      out.col(k++) = m.col(j);
    }
  }
  return out;
}

Matrix keep_rows(const Matrix& m, const std::vector<bool>& keep) {
  assert(static_cast<Index>(keep.size()) == m.rows());
  Matrix out(count_kept(keep), m.cols());
  Index k = 0;
  for (Index i = 0; i < m.rows(); ++i) {
    if (keep[static_cast<std::size_t>(i)]) {
      out.row(k++) = m.row(i);
    }
  }
  return out;
}

} // namespace adrbm
