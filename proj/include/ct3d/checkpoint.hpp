#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ct3d/param_store.hpp"

namespace ct3d::num {

// Binary checkpoint layout (all integers and floats little-endian):
//
//   magic      8 bytes  "CT3DCKPT"
//   version    u32      kCheckpointVersion
//   meta_len   u32      followed by meta_len bytes of UTF-8 metadata (JSON)
//   count      u32      number of parameter records
//   per record:
//     name_len u32, name bytes, rows u64, cols u64, rows·cols f64 values
//
// Identical stores and metadata produce identical bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor2 value;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string metadata;
  std::vector<NamedTensor> params;
};

std::vector<std::uint8_t> serialize_checkpoint(const ParamStore& store, const std::string& metadata);
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::string& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into a store with the same names and shapes.
void restore_params(const Checkpoint& ckpt, ParamStore& store);

}  // namespace ct3d::num
