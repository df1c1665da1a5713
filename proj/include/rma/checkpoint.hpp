#pragma once

// Binary checkpoint format, little-endian:
//
//   "RMA1"            4 bytes magic
//   u32 version       currently 1
//   u32 count         number of tensors
//   count x {
//     u16 name_len, name (UTF-8),
//     u8 rank, u32 dims[rank],
//     f32 data[product(dims)]
//   }
//
// A model checkpoint stores every parameter under its dotted name, the
// architecture under "meta.arch", and optionally the Adam state under "adam.*".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rma/adam.hpp"
#include "rma/model.hpp"

namespace rma {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool operator==(const NamedTensor&) const = default;
};

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
/// Throws FormatError (with byte offset) on bad magic, unsupported version or truncation.
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path);

struct Checkpoint {
  Model<float> model;
  std::optional<AdamState> optimizer;
};

void save_checkpoint(const Model<float>& model, const AdamState* optimizer,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Architecture descriptor flattened to numbers, and back.
std::vector<float> encode_arch(const ModelConfig& config);
ModelConfig decode_arch(const std::vector<float>& values);

}  // namespace rma
