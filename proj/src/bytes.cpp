#include "cgkasim/bytes.hpp"

#include "cgkasim/errors.hpp"

namespace cgkasim {

Secret::Secret(const Bytes& b)
{
  if (b.size() != secret_size) {
    throw InvalidParameterError("secret must be exactly 32 bytes");
  }
  std::copy(b.begin(), b.end(), data.begin());
}

Bytes
concat(std::initializer_list<Bytes> parts)
{
  Bytes out;
  size_t total = 0;
  for (const auto& p : parts) {
    total += p.size();
  }
  out.reserve(total);
  for (const auto& p : parts) {
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

Bytes
from_ascii(const std::string& s)
{
  return Bytes(s.begin(), s.end());
}

static char
hex_digit(uint8_t v)
{
  return static_cast<char>(v < 10 ? '0' + v : 'a' + (v - 10));
}

std::string
to_hex(const Bytes& data)
{
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(hex_digit(b >> 4));
    out.push_back(hex_digit(b & 0x0f));
  }
  return out;
}

std::string
to_hex(const Secret& s)
{
  return to_hex(Bytes(s.data.begin(), s.data.end()));
}

static uint8_t
hex_value(char c)
{
  if (c >= '0' && c <= '9') {
    return static_cast<uint8_t>(c - '0');
  }
  if (c >= 'a' && c <= 'f') {
    return static_cast<uint8_t>(c - 'a' + 10);
  }
  if (c >= 'A' && c <= 'F') {
    return static_cast<uint8_t>(c - 'A' + 10);
  }
  throw InvalidParameterError("invalid hex digit");
}

Bytes
from_hex(const std::string& hex)
{
  if (hex.size() % 2 != 0) {
    throw InvalidParameterError("hex string must have even length");
  }
  Bytes out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<uint8_t>((hex_value(hex[i]) << 4) | hex_value(hex[i + 1])));
  }
  return out;
}

bool
bytes_less(const Bytes& lhs, const Bytes& rhs)
{
  return std::lexicographical_compare(lhs.begin(), lhs.end(), rhs.begin(), rhs.end());
}

} // namespace cgkasim
