#pragma once

// Parameter checkpoint file, all integers and reals little-endian:
//
//   magic        8 bytes  "RELIFECK"
//   version      u32      1
//   config_hash  u64      hash of the architecture-defining config fields
//   count        u64      number of tensors
//   count times, in sorted name order:
//     name_len   u32
//     name       name_len bytes (UTF-8, dotted, e.g. "dim.pos.W_e")
//     ndim       u32      always 2
//     dims       ndim x u64
//     values     prod(dims) x f64, row-major

#include "relife/nn/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace relife::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 8> kCheckpointMagic = {'R', 'E', 'L', 'I', 'F', 'E', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  std::array<char, sizeof(T)> bytes{};
  if (!is.read(bytes.data(), sizeof(T))) throw CheckpointError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ParamRegistry& params, std::uint64_t config_hash) {
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  detail::write_le<std::uint64_t>(os, config_hash);
  detail::write_le<std::uint64_t>(os, params.size());
  for (const auto& [name, t] : params) {
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_le<std::uint32_t>(os, 2);
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.value.rows()));
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.value.cols()));
    for (Eigen::Index k = 0; k < t.value.size(); ++k) detail::write_le<double>(os, t.value.data()[k]);
  }
  if (!os) throw CheckpointError("failed writing checkpoint");
}

inline void save_checkpoint(const std::string& path, const ParamRegistry& params, std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open " + path + " for writing");
  write_checkpoint(os, params, config_hash);
}

/// Reads tensor values into an already-shaped registry. Names and shapes must
/// match exactly; a non-zero expected_hash must equal the stored hash.
inline std::uint64_t read_checkpoint(std::istream& is, ParamRegistry& params, std::uint64_t expected_hash = 0) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto hash = detail::read_le<std::uint64_t>(is);
  if (expected_hash != 0 && hash != expected_hash) {
    throw CheckpointError("config hash mismatch: checkpoint " + std::to_string(hash) + ", config " +
                          std::to_string(expected_hash));
  }
  const auto count = detail::read_le<std::uint64_t>(is);
  if (count != params.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                          std::to_string(params.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = detail::read_le<std::uint32_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw CheckpointError("checkpoint truncated");
    if (!params.contains(name)) throw CheckpointError("unexpected tensor " + name);
    Tensor& t = params.at(name);
    const auto ndim = detail::read_le<std::uint32_t>(is);
    if (ndim != 2) throw CheckpointError(name + ": expected 2 dims, got " + std::to_string(ndim));
    const auto rows = detail::read_le<std::uint64_t>(is);
    const auto cols = detail::read_le<std::uint64_t>(is);
    if (static_cast<Eigen::Index>(rows) != t.value.rows() || static_cast<Eigen::Index>(cols) != t.value.cols()) {
      throw CheckpointError(name + ": shape " + shape_str(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)) +
                            " does not match model " + shape_str(t.value));
    }
    for (Eigen::Index k = 0; k < t.value.size(); ++k) t.value.data()[k] = detail::read_le<double>(is);
  }
  return hash;
}

inline std::uint64_t load_checkpoint(const std::string& path, ParamRegistry& params, std::uint64_t expected_hash = 0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path);
  return read_checkpoint(is, params, expected_hash);
}

}  // namespace relife::nn
