#pragma once

#include "adrbm/adapt.hpp"
#include "adrbm/rbm.hpp"

namespace adrbm {

struct LayerGenConfig {
  double alpha_WD = 1.0;
  double alpha_E = 1.0;
  double theta_L1 = 0.01;
  double theta_L2 = 0.01;
  int max_layers = 5;

  void validate() const;
};

/// Everything a trainer needs besides data and a random stream.
struct TrainConfig {
  CdConfig cd;
  AdaptConfig adapt;
  ForgettingConfig forget;
  LayerGenConfig layers;
  int epochs = 100;
  /// false runs the traditional model: no structural edits, no penalties.
  bool adaptive = true;
  /// Global L2 clip on each update; 0 disables.
  double clip_norm = 5.0;
  /// Initial hidden width J.
  Index n_hidden = 10;
  /// Recurrent state width K; 0 means K = J at initialization.
  Index state_dim = 0;

  void validate() const;
};

} // namespace adrbm
