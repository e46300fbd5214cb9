#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "adrbm/train_config.hpp"

namespace adrbm {

enum class ModelKind { rbm, dbn, rnn_rbm, rnn_dbn };

std::string_view to_string(ModelKind kind);
/// Throws ConfigError for an unknown name.
ModelKind parse_model_kind(std::string_view name);
bool is_recurrent(ModelKind kind);

/// A complete, reproducible description of one training run.
struct RunConfig {
  ModelKind kind = ModelKind::rnn_rbm;
  TrainConfig train;
  std::uint64_t seed = 1;
  std::filesystem::path train_path;
  std::filesystem::path test_path; ///< optional
  std::filesystem::path out_dir;

  /// Threshold bounds always; dataset paths only when `check_paths`.
  void validate(bool check_paths) const;
  /// Training config with the per-kind depth limit applied (single-layer
  /// kinds never grow).
  [[nodiscard]] TrainConfig effective_train() const;
};

/// Parses "key = value" lines with dotted section prefixes. '#' starts a
/// comment. Unknown or repeated keys are errors. Relative paths resolve
/// against `base_dir`.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every key with its effective value; parse_run_config accepts the output.
std::string render_run_config(const RunConfig& cfg);

} // namespace adrbm
