#include "adrbm/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "adrbm/errors.hpp"

namespace adrbm {

namespace fs = std::filesystem;

namespace {

class Writer {
public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

private:
  void put(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
    }
  }
  std::string out_;
};

class Reader {
public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }

private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw CheckpointTruncatedError(
          fmt::format("checkpoint truncated at byte {} (need {} more)", pos_, n));
    }
  }
  std::uint64_t get(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

// Expected shape of a layer tensor given the header dims, or {-1, -1} for
// tensors the header does not constrain.
std::pair<Index, Index> expected_shape(std::string_view suffix, const LayerDims& d) {
  const Index I = d.n_visible;
  const Index J = d.n_hidden;
  const Index K = d.state_dim;
  if (suffix == "b") return {I, 1};
  if (suffix == "c") return {J, 1};
  if (suffix == "W") return {I, J};
  if (suffix == "u") return {K, 1};
  if (suffix == "u0") return {K, 1};
  if (suffix == "W_uv") return {I, K};
  if (suffix == "W_uh") return {J, K};
  if (suffix == "W_vu") return {K, I};
  if (suffix == "W_uu") return {K, K};
  return {-1, -1};
}

void check_layer_shapes(const Checkpoint& ckpt) {
  for (const auto& t : ckpt.tensors) {
    if (!t.name.starts_with("layer")) {
      continue;
    }
    const auto dot = t.name.find('.');
    if (dot == std::string::npos) {
      continue;
    }
    std::size_t layer = 0;
    try {
      layer = std::stoul(t.name.substr(5, dot - 5));
    } catch (const std::exception&) {
      throw CheckpointDimensionError("bad layer tensor name " + t.name);
    }
    if (layer >= ckpt.layers.size()) {
      throw CheckpointDimensionError(
          fmt::format("tensor {} refers to layer {} but header lists {} layers", t.name, layer,
                      ckpt.layers.size()));
    }
    const auto [rows, cols] = expected_shape(t.name.substr(dot + 1), ckpt.layers[layer]);
    if (rows >= 0 && (t.value.rows() != rows || t.value.cols() != cols)) {
      throw CheckpointDimensionError(fmt::format("tensor {} is {}x{}, header implies {}x{}",
                                                 t.name, t.value.rows(), t.value.cols(), rows,
                                                 cols));
    }
  }
}

} // namespace

void Checkpoint::put(std::string name, Matrix value) {
  tensors.push_back({std::move(name), std::move(value)});
}

void Checkpoint::put(std::string name, const Vector& value) {
  tensors.push_back({std::move(name), Matrix(value)});
}

void Checkpoint::put_scalar(std::string name, double value) {
  tensors.push_back({std::move(name), Matrix::Constant(1, 1, value)});
}

bool Checkpoint::has(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) {
      return true;
    }
  }
  return false;
}

const Matrix& Checkpoint::get(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) {
      return t.value;
    }
  }
  throw CheckpointDimensionError(fmt::format("checkpoint has no tensor '{}'", name));
}

Vector Checkpoint::get_vector(std::string_view name) const {
  const Matrix& m = get(name);
  if (m.cols() != 1 && m.rows() != 0) {
    throw CheckpointDimensionError(fmt::format("tensor '{}' is not a column vector", name));
  }
  return m.col(0);
}

double Checkpoint::get_scalar(std::string_view name) const {
  const Matrix& m = get(name);
  if (m.rows() != 1 || m.cols() != 1) {
    throw CheckpointDimensionError(fmt::format("tensor '{}' is not a scalar", name));
  }
  return m(0, 0);
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(to_string(ckpt.kind));
  w.u64(ckpt.seed);
  w.str(ckpt.rng_id);
  w.u32(static_cast<std::uint32_t>(ckpt.layers.size()));
  for (const auto& d : ckpt.layers) {
    w.u64(static_cast<std::uint64_t>(d.n_visible));
    w.u64(static_cast<std::uint64_t>(d.n_hidden));
    w.u64(static_cast<std::uint64_t>(d.state_dim));
  }
  w.u64(ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    w.str(t.name);
    w.u64(static_cast<std::uint64_t>(t.value.rows()));
    w.u64(static_cast<std::uint64_t>(t.value.cols()));
    for (Index r = 0; r < t.value.rows(); ++r) {
      for (Index c = 0; c < t.value.cols(); ++c) {
        w.f64(t.value(r, c));
      }
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size()) {
    throw CheckpointTruncatedError("checkpoint shorter than its magic number");
  }
  Reader r(bytes);
  if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw CheckpointVersionError("not a checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError(fmt::format("unsupported checkpoint version {} (expected {})",
                                             version, kCheckpointVersion));
  }
  Checkpoint ckpt;
  try {
    ckpt.kind = parse_model_kind(r.str());
  } catch (const ConfigError& e) {
    throw CheckpointVersionError(std::string("checkpoint header: ") + e.what());
  }
  ckpt.seed = r.u64();
  ckpt.rng_id = r.str();
  const std::uint32_t n_layers = r.u32();
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    LayerDims d;
    d.n_visible = static_cast<Index>(r.u64());
    d.n_hidden = static_cast<Index>(r.u64());
    d.state_dim = static_cast<Index>(r.u64());
    ckpt.layers.push_back(d);
  }
  const std::uint64_t n_tensors = r.u64();
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = r.str();
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows != 0 && cols > r.remaining() / 8 / rows) {
      throw CheckpointTruncatedError(
          fmt::format("tensor {} claims {}x{} entries beyond end of file", t.name, rows, cols));
    }
    t.value.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index a = 0; a < t.value.rows(); ++a) {
      for (Index b = 0; b < t.value.cols(); ++b) {
        t.value(a, b) = r.f64();
      }
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) {
    throw CheckpointDimensionError(
        fmt::format("{} trailing bytes after the last tensor", r.remaining()));
  }
  check_layer_shapes(ckpt);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw CheckpointError("cannot write checkpoint " + tmp.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw CheckpointError("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("cannot open checkpoint " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

} // namespace adrbm
