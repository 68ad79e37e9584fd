#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cgate/tensor.hpp"

// TZR file layout, little-endian throughout:
//   0..3    "TZR1"
//   4..7    rank (u32, 1..4)
//   8..     rank x u32 extents
//   then    prod(extents) x f32 payload, row-major
// Nothing else: no padding, no footer.
namespace cgate {

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace cgate
