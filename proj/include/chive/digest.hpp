#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace chive {

// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320).
std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t seed = 0);

std::uint32_t crc32_file(const std::string& path);

std::string crc32_hex(std::uint32_t crc);

}  // namespace chive
