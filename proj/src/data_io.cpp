#include "adrbm/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "adrbm/errors.hpp"

namespace adrbm {

namespace {

using nlohmann::json;

[[noreturn]] void fail_line(const std::string& source, std::size_t line, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line) + ": " + what);
}

Sequence parse_line(const std::string& text, const std::string& source, std::size_t line) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    fail_line(source, line, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object() || !obj.contains("seq")) {
    fail_line(source, line, "expected an object with key \"seq\"");
  }
  for (const auto& item : obj.items()) {
    if (item.key() != "seq" && item.key() != "id") {
      fail_line(source, line, "unexpected key \"" + item.key() + "\"");
    }
  }
  Sequence seq;
  if (obj.contains("id")) {
    if (!obj["id"].is_string()) {
      fail_line(source, line, "\"id\" must be a string");
    }
    seq.id = obj["id"].get<std::string>();
  }
  const json& frames = obj["seq"];
  if (!frames.is_array() || frames.empty()) {
    fail_line(source, line, "\"seq\" must be a non-empty array of frames");
  }
  const std::size_t width = frames.front().is_array() ? frames.front().size() : 0;
  seq.frames.resize(static_cast<Index>(frames.size()), static_cast<Index>(width));
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const json& frame = frames[t];
    if (!frame.is_array()) {
      fail_line(source, line, "frame " + std::to_string(t) + " is not an array");
    }
    if (frame.size() != width) {
      fail_line(source, line,
                "frame " + std::to_string(t) + " has dimension " + std::to_string(frame.size()) +
                    ", expected " + std::to_string(width));
    }
    for (std::size_t i = 0; i < width; ++i) {
      const json& bit = frame[i];
      if (!bit.is_number_integer() || (bit.get<long long>() != 0 && bit.get<long long>() != 1)) {
        fail_line(source, line, "frame entries must be integers 0 or 1");
      }
      seq.frames(static_cast<Index>(t), static_cast<Index>(i)) =
          static_cast<double>(bit.get<long long>());
    }
  }
  if (width == 0) {
    fail_line(source, line, "frames must have at least one unit");
  }
  return seq;
}

std::vector<Matrix> frames_of(const std::vector<Sequence>& seqs) {
  std::vector<Matrix> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    out.push_back(s.frames);
  }
  return out;
}

} // namespace

std::vector<Matrix> SequenceDataset::train_frames() const { return frames_of(train); }
std::vector<Matrix> SequenceDataset::test_frames() const { return frames_of(test); }

std::vector<Sequence> read_jsonl(std::istream& in, const std::string& source) {
  std::vector<Sequence> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); })) {
      continue;
    }
    Sequence seq = parse_line(text, source, line);
    if (!out.empty() && seq.frames.cols() != out.front().frames.cols()) {
      fail_line(source, line,
                "inconsistent dimension: " + std::to_string(seq.frames.cols()) + " vs " +
                    std::to_string(out.front().frames.cols()));
    }
    out.push_back(std::move(seq));
  }
  if (out.empty()) {
    throw DataError(source + ": no sequences");
  }
  return out;
}

std::vector<Sequence> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open dataset file " + path.string());
  }
  return read_jsonl(in, path.string());
}

void write_jsonl(std::ostream& out, std::span<const Sequence> sequences) {
  for (const auto& s : sequences) {
    json frames = json::array();
    for (Index t = 0; t < s.frames.rows(); ++t) {
      json frame = json::array();
      for (Index i = 0; i < s.frames.cols(); ++i) {
        frame.push_back(s.frames(t, i) > 0.5 ? 1 : 0);
      }
      frames.push_back(std::move(frame));
    }
    json obj;
    if (!s.id.empty()) {
      obj["id"] = s.id;
    }
    obj["seq"] = std::move(frames);
    out << obj.dump() << '\n';
  }
}

void write_jsonl(const std::filesystem::path& path, std::span<const Sequence> sequences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write dataset file " + path.string());
  }
  write_jsonl(out, sequences);
}

SequenceDataset load_jsonl(const std::filesystem::path& path) {
  SequenceDataset ds;
  ds.name = path.stem().string();
  ds.train = read_jsonl(path);
  ds.dim = ds.train.front().frames.cols();
  ds.provenance = "jsonl:" + path.string() + " dim=" + std::to_string(ds.dim);
  return ds;
}

SequenceDataset load_split(const std::filesystem::path& train_path,
                           const std::filesystem::path& test_path) {
  SequenceDataset ds = load_jsonl(train_path);
  if (!test_path.empty()) {
    ds.test = read_jsonl(test_path);
    const Index test_dim = ds.test.front().frames.cols();
    if (test_dim != ds.dim) {
      throw DataError("inconsistent dimension: train has " + std::to_string(ds.dim) +
                      ", test has " + std::to_string(test_dim));
    }
    ds.provenance += " test=" + test_path.string();
  }
  return ds;
}

void SynthCycleConfig::validate() const {
  if (dim < 1 || dim > 62) {
    throw DataError("synth_cycle: dim must lie in [1, 62]");
  }
  if (n_patterns < 1 || n_patterns > (Index{1} << dim)) {
    throw DataError("synth_cycle: n_patterns must lie in [1, 2^dim]");
  }
  if (length < 1 || n_sequences < 1) {
    throw DataError("synth_cycle: length and n_sequences must be >= 1");
  }
  if (!(noise_flip_prob >= 0.0 && noise_flip_prob < 0.5)) {
    throw DataError("synth_cycle: noise_flip_prob must lie in [0, 0.5)");
  }
  if (parity_bits < 0 || 2 * parity_bits > dim) {
    throw DataError("synth_cycle: parity_bits must lie in [0, dim/2]");
  }
}

SequenceDataset synth_cycle(const SynthCycleConfig& cfg, RngStream& rng) {
  cfg.validate();
  RngStream pattern_rng = rng.split(0);
  std::set<std::uint64_t> codes;
  const std::uint64_t space = std::uint64_t{1} << cfg.dim;
  std::vector<std::uint64_t> patterns;
  while (static_cast<Index>(patterns.size()) < cfg.n_patterns) {
    const std::uint64_t code = pattern_rng.below(space);
    if (codes.insert(code).second) {
      patterns.push_back(code);
    }
  }

  const Index width = cfg.dim + cfg.parity_bits;
  std::vector<Sequence> all;
  RngStream seq_rng = rng.split(1);
  for (Index s = 0; s < cfg.n_sequences; ++s) {
    Sequence seq;
    seq.id = "cycle-" + std::to_string(s);
    seq.frames.resize(cfg.length, width);
    const auto phase = static_cast<Index>(seq_rng.below(static_cast<std::uint64_t>(cfg.n_patterns)));
    for (Index t = 0; t < cfg.length; ++t) {
      const std::uint64_t code = patterns[static_cast<std::size_t>((phase + t) % cfg.n_patterns)];
      for (Index i = 0; i < cfg.dim; ++i) {
        double bit = static_cast<double>((code >> i) & 1U);
        if (seq_rng.uniform() < cfg.noise_flip_prob) {
          bit = 1.0 - bit;
        }
        seq.frames(t, i) = bit;
      }
      for (Index p = 0; p < cfg.parity_bits; ++p) {
        seq.frames(t, cfg.dim + p) =
            seq.frames(t, 2 * p) != seq.frames(t, 2 * p + 1) ? 1.0 : 0.0;
      }
    }
    all.push_back(std::move(seq));
  }

  RngStream split_rng = rng.split(2);
  const std::vector<std::size_t> order = permutation(all.size(), split_rng);
  const std::size_t n_test = all.size() / 5;
  SequenceDataset ds;
  ds.name = "synth-cycle";
  ds.dim = width;
  for (std::size_t r = 0; r < order.size(); ++r) {
    (r < n_test ? ds.test : ds.train).push_back(all[order[r]]);
  }
  // Keep generation order within each split.
  auto by_id = [](const Sequence& a, const Sequence& b) {
    return std::stoi(a.id.substr(6)) < std::stoi(b.id.substr(6));
  };
  std::sort(ds.train.begin(), ds.train.end(), by_id);
  std::sort(ds.test.begin(), ds.test.end(), by_id);
  std::ostringstream prov;
  prov << "synth_cycle patterns=" << cfg.n_patterns << " dim=" << cfg.dim
       << " length=" << cfg.length << " sequences=" << cfg.n_sequences
       << " noise=" << cfg.noise_flip_prob << " parity_bits=" << cfg.parity_bits;
  ds.provenance = prov.str();
  return ds;
}

Vector fit_thresholds(std::span<const Matrix> sequences, const ThresholdPolicy& policy) {
  if (sequences.empty()) {
    throw DataError("binarize: no sequences");
  }
  const Matrix all = stack_frames(sequences);
  if (all.rows() == 0) {
    throw DataError("binarize: no frames");
  }
  if (!all.allFinite()) {
    throw DataError("binarize: non-finite values");
  }
  if (policy.kind == ThresholdPolicy::Kind::fixed) {
    return Vector::Constant(all.cols(), policy.value);
  }
  Vector out(all.cols());
  for (Index i = 0; i < all.cols(); ++i) {
    std::vector<double> col(all.col(i).data(), all.col(i).data() + all.rows());
    const auto mid = col.begin() + static_cast<std::ptrdiff_t>(col.size() / 2);
    std::nth_element(col.begin(), mid, col.end());
    double median = *mid;
    if (col.size() % 2 == 0) {
      median = 0.5 * (median + *std::max_element(col.begin(), mid));
    }
    out[i] = median;
  }
  return out;
}

std::vector<Matrix> binarize_real_sequences(std::span<const Matrix> sequences,
                                            const Vector& thresholds) {
  if (sequences.empty()) {
    throw DataError("binarize: no sequences");
  }
  std::vector<Matrix> out;
  out.reserve(sequences.size());
  for (const auto& seq : sequences) {
    if (seq.cols() != thresholds.size()) {
      throw DimensionError("binarize: frame dimension " + std::to_string(seq.cols()) +
                           " does not match " + std::to_string(thresholds.size()) +
                           " thresholds");
    }
    Matrix bin(seq.rows(), seq.cols());
    for (Index t = 0; t < seq.rows(); ++t) {
      for (Index i = 0; i < seq.cols(); ++i) {
        bin(t, i) = seq(t, i) > thresholds[i] ? 1.0 : 0.0;
      }
    }
    out.push_back(std::move(bin));
  }
  return out;
}

std::vector<Matrix> binarize_real_sequences(std::span<const Matrix> sequences,
                                            const ThresholdPolicy& policy) {
  return binarize_real_sequences(sequences, fit_thresholds(sequences, policy));
}

Matrix stack_frames(std::span<const Matrix> sequences) {
  Index rows = 0;
  const Index cols = sequences.empty() ? 0 : sequences.front().cols();
  for (const auto& s : sequences) {
    rows += s.rows();
  }
  Matrix out(rows, cols);
  Index r = 0;
  for (const auto& s : sequences) {
    out.middleRows(r, s.rows()) = s;
    r += s.rows();
  }
  return out;
}

} // namespace adrbm
