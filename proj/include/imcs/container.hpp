#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "imcs/tensor.hpp"

namespace imcs {

// Named-array container file. Layout, all integers little-endian:
//   magic "IMCS" | u32 version=1 | u32 array count
//   per array: u16 name length | name bytes (UTF-8) | u8 dtype (1 = f64)
//              | u8 rank | rank x u64 dims | payload, row-major f64
//   trailing u32 CRC-32 over every preceding byte
// Readers reject bad magic, unknown versions, unknown dtypes, truncation and
// checksum mismatches with IoError.

struct NamedArray {
  std::string name;
  Matrix data;
};

std::uint32_t crc32(const unsigned char* data, std::size_t len,
                    std::uint32_t crc = 0);

void write_container(const std::string& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_container(const std::string& path);

}  // namespace imcs
