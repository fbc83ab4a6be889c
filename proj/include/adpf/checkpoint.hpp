#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adpf/tensor.hpp"

namespace adpf {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

inline constexpr char kCheckpointMagic[4] = {'A', 'D', 'P', 'F'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

// Layout, all integers little-endian:
//   "ADPF" | version:u8 | count:u64 |
//   count x ( name_len:u64 | name:utf8 | rank:u64 | extents:u64[rank] | payload:f64[numel] )
std::string encode_checkpoint(const std::vector<NamedTensor>& params);
std::vector<NamedTensor> decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& params);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `params` by name. Every parameter must be
/// present with an identical shape; extra stored entries are an error too.
void restore_parameters(const std::vector<NamedTensor>& stored, std::vector<NamedTensor>& params);

}  // namespace adpf
