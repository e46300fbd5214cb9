#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "adrbm/numerics.hpp"

namespace adrbm {

/// One binary sequence, T x I with entries 0 or 1.
struct Sequence {
  std::string id; ///< empty when the source line had no "id"
  Matrix frames;

  friend bool operator==(const Sequence& a, const Sequence& b) {
    return a.id == b.id && a.frames.rows() == b.frames.rows() &&
           a.frames.cols() == b.frames.cols() && a.frames == b.frames;
  }
};

struct SequenceDataset {
  std::string name;
  Index dim = 0;
  std::vector<Sequence> train;
  std::vector<Sequence> test;
  std::string provenance;

  [[nodiscard]] std::vector<Matrix> train_frames() const;
  [[nodiscard]] std::vector<Matrix> test_frames() const;
};

/// Parses one sequence per line: {"seq": [[0,1],...], "id": "..."}. Blank
/// lines are skipped. Throws DataError naming the line on malformed input
/// and naming both dimensions when frame widths disagree.
std::vector<Sequence> read_jsonl(std::istream& in, const std::string& source);
std::vector<Sequence> read_jsonl(const std::filesystem::path& path);

/// Writes sequences in the canonical one-object-per-line form.
void write_jsonl(std::ostream& out, std::span<const Sequence> sequences);
void write_jsonl(const std::filesystem::path& path, std::span<const Sequence> sequences);

/// Every sequence of `path` goes to the train split.
SequenceDataset load_jsonl(const std::filesystem::path& path);

/// Train and test splits from separate files (test may be empty).
SequenceDataset load_split(const std::filesystem::path& train_path,
                           const std::filesystem::path& test_path);

struct SynthCycleConfig {
  Index n_patterns = 4;
  Index dim = 8;
  Index length = 40;
  Index n_sequences = 50;
  double noise_flip_prob = 0.0;
  /// Extra bits appended to each frame; bit p is the XOR of frame bits 2p
  /// and 2p+1 after noise.
  Index parity_bits = 0;

  void validate() const;
};

/// Sequences cycling through n_patterns distinct random patterns from a
/// random phase, each bit flipped with noise_flip_prob. 80/20 train/test
/// split by sequence.
SequenceDataset synth_cycle(const SynthCycleConfig& cfg, RngStream& rng);

struct ThresholdPolicy {
  enum class Kind { median, fixed };
  Kind kind = Kind::median;
  double value = 0.5;
};

/// Per-dimension thresholds: the median over all frames, or the fixed value.
Vector fit_thresholds(std::span<const Matrix> sequences, const ThresholdPolicy& policy);

/// 1 where value > threshold (strict), else 0.
std::vector<Matrix> binarize_real_sequences(std::span<const Matrix> sequences,
                                            const Vector& thresholds);
std::vector<Matrix> binarize_real_sequences(std::span<const Matrix> sequences,
                                            const ThresholdPolicy& policy);

/// All frames stacked into one matrix, in sequence order.
Matrix stack_frames(std::span<const Matrix> sequences);

} // namespace adrbm
