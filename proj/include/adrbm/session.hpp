#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "adrbm/checkpoint.hpp"
#include "adrbm/config.hpp"
#include "adrbm/dbn.hpp"
#include "adrbm/metrics.hpp"
#include "adrbm/rnn_dbn.hpp"

namespace adrbm {

/// File names inside a run directory.
inline constexpr const char* kRunConfigFile = "config.txt";
inline constexpr const char* kRunLogFile = "log.csv";
inline constexpr const char* kRunCheckpointFile = "model.ckpt";
inline constexpr const char* kRunSummaryFile = "summary.txt";

Checkpoint to_checkpoint(ModelKind kind, std::uint64_t seed, const DbnTrainer& trainer,
                         int steps);
Checkpoint to_checkpoint(ModelKind kind, std::uint64_t seed, const RnnDbnTrainer& trainer,
                         int steps);

/// Trainer state restored from `ckpt`; `steps` receives the number of
/// epochs already logged. Throws CheckpointDimensionError on missing state.
DbnTrainer restore_dbn_trainer(const Checkpoint& ckpt, int& steps);
RnnDbnTrainer restore_rnn_dbn_trainer(const Checkpoint& ckpt, int& steps);

/// Every layer stored in the checkpoint, including one still in training.
Dbn dbn_from_checkpoint(const Checkpoint& ckpt);
RnnDbn rnn_dbn_from_checkpoint(const Checkpoint& ckpt);

/// Multi-line listing of kind, seed, layers and tensor shapes.
std::string describe_checkpoint(const Checkpoint& ckpt);

struct TrainRequest {
  RunConfig config;
  std::filesystem::path resume; ///< empty for a fresh run
  int stop_after = -1;          ///< epochs to run in this call; -1 = until done
};

struct TrainReport {
  int steps = 0; ///< epochs logged in total
  bool finished = false;
  std::string summary;
};

/// Trains into config.out_dir, which ends up holding exactly the rendered
/// config, the CSV log, the latest checkpoint and a summary. The log row and
/// checkpoint are written after every epoch.
TrainReport run_train(const TrainRequest& request);

/// Next-frame metrics for recurrent kinds, reconstruction metrics for
/// static kinds. Throws DimensionError when widths disagree.
PredictionMetrics evaluate_checkpoint(const Checkpoint& ckpt, std::span<const Matrix> sequences);

/// T frames drawn autoregressively from a recurrent checkpoint.
Matrix sample_sequence(const Checkpoint& ckpt, Index length, std::uint64_t seed);

} // namespace adrbm
