#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cgkasim {

using Bytes = std::vector<uint8_t>;

// Fixed-width secret value used throughout the key schedule and KDF layer.
inline constexpr size_t secret_size = 32;

struct Secret
{
  std::array<uint8_t, secret_size> data{};

  Secret() = default;
  explicit Secret(const Bytes& b);

  Bytes to_bytes() const { return Bytes(data.begin(), data.end()); }

  friend bool operator==(const Secret& lhs, const Secret& rhs) = default;
};

Bytes concat(std::initializer_list<Bytes> parts);

Bytes from_ascii(const std::string& s);
std::string to_hex(const Bytes& data);
std::string to_hex(const Secret& s);
Bytes from_hex(const std::string& hex);

// Lexicographic comparison used for deterministic tie-breaking on identifiers.
bool bytes_less(const Bytes& lhs, const Bytes& rhs);

} // namespace cgkasim
