#pragma once

#include <cstddef>

#include "adrbm/numerics.hpp"

namespace adrbm {

struct PredictionMetrics {
  double error = 0.0;         ///< mean per-frame cross-entropy, nats
  double correct_ratio = 0.0; ///< mean over (frame, unit) of thresholded agreement
  std::size_t frames = 0;
};

/// Accumulates next-frame prediction quality. A prediction p counts as
/// correct when (p > 0.5) == v; p exactly 0.5 is always incorrect.
class MetricAccumulator {
public:
  /// Row t of `predictions` is the prediction for row t of `frames`; rows
  /// before `first_frame` are skipped.
  void add(const Matrix& frames, const Matrix& predictions, Index first_frame);

  [[nodiscard]] PredictionMetrics result() const;

private:
  double cross_entropy_ = 0.0;
  double correct_ = 0.0;
  double bits_ = 0.0;
  std::size_t frames_ = 0;
};

} // namespace adrbm
