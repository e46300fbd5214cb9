#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "adrbm/config.hpp"
#include "adrbm/numerics.hpp"

namespace adrbm {

inline constexpr std::string_view kCheckpointMagic = "ADRBMCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct LayerDims {
  Index n_visible = 0;
  Index n_hidden = 0;
  Index state_dim = 0; ///< 0 for static layers
};

struct NamedTensor {
  std::string name;
  Matrix value;
};

/// Versioned container of named row-major float64 tensors.
///
/// Layout, all integers little-endian:
///   magic "ADRBMCKP" | u32 version | str kind | u64 seed | str rng id |
///   u32 n_layers | n_layers x (u64 I, u64 J, u64 K) |
///   u64 n_tensors | n_tensors x (str name | u64 rows | u64 cols | f64 data...)
/// where str is a u32 byte length followed by UTF-8 bytes.
struct Checkpoint {
  ModelKind kind = ModelKind::rnn_rbm;
  std::uint64_t seed = 0;
  std::string rng_id;
  std::vector<LayerDims> layers;
  std::vector<NamedTensor> tensors;

  void put(std::string name, Matrix value);
  void put(std::string name, const Vector& value);
  void put_scalar(std::string name, double value);

  [[nodiscard]] bool has(std::string_view name) const;
  /// Throws CheckpointDimensionError when missing.
  [[nodiscard]] const Matrix& get(std::string_view name) const;
  [[nodiscard]] Vector get_vector(std::string_view name) const;
  [[nodiscard]] double get_scalar(std::string_view name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointVersionError (magic or version), CheckpointTruncatedError
/// (short input) or CheckpointDimensionError (shapes disagree with header).
Checkpoint decode_checkpoint(std::string_view bytes);

/// Writes through a temporary file and renames, so an interrupted save
/// leaves the previous file intact.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace adrbm
