#include "adrbm/metrics.hpp"

#include <cmath>

#include "adrbm/errors.hpp"

namespace adrbm {

void MetricAccumulator::add(const Matrix& frames, const Matrix& predictions,
                            Index first_frame) {
  if (frames.rows() != predictions.rows() || frames.cols() != predictions.cols()) {
    throw DimensionError("prediction shape does not match frame shape");
  }
  for (Index t = first_frame; t < frames.rows(); ++t) {
    for (Index i = 0; i < frames.cols(); ++i) {
      const double p = predictions(t, i);
      const double v = frames(t, i);
      cross_entropy_ -= v * std::log(p) + (1.0 - v) * std::log1p(-p);
      const bool hit = (p > 0.5 && v > 0.5) || (p < 0.5 && v < 0.5);
      correct_ += hit ? 1.0 : 0.0;
    }
    bits_ += static_cast<double>(frames.cols());
    ++frames_;
  }
}

PredictionMetrics MetricAccumulator::result() const {
  PredictionMetrics m;
  m.frames = frames_;
  if (frames_ > 0) {
    m.error = cross_entropy_ / static_cast<double>(frames_);
    m.correct_ratio = bits_ > 0.0 ? correct_ / bits_ : 0.0;
  }
  return m;
}

} // namespace adrbm
