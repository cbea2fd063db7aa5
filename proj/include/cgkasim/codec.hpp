#pragma once

#include "cgkasim/bytes.hpp"
#include "cgkasim/errors.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cgkasim {

// Deterministic binary encoding: big-endian fixed-width integers and 32-bit
// length-prefixed opaque fields. Top-level wire objects start with a one-byte
// format version so future revisions can be detected instead of misparsed.
inline constexpr uint8_t wire_format_version = 1;

class Writer
{
public:
  void u8(uint8_t v);
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void boolean(bool v);
  void raw(const Bytes& data);
  void bytes(const Bytes& data);
  void str(const std::string& s);
  void secret(const Secret& s);

  template<typename T, typename F>
  void vec(const std::vector<T>& items, F&& write_one)
  {
    if (items.size() > UINT32_MAX) {
      throw InvalidParameterError("vector too large to encode");
    }
    u32(static_cast<uint32_t>(items.size()));
    for (const auto& item : items) {
      write_one(*this, item);
    }
  }

  const Bytes& out() const { return _out; }
  Bytes take() { return std::move(_out); }

private:
  Bytes _out;
};

class Reader
{
public:
  explicit Reader(const Bytes& data)
    : _data(data)
  {
  }

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  bool boolean();
  Bytes bytes();
  std::string str();
  Secret secret();

  template<typename T, typename F>
  std::vector<T> vec(F&& read_one)
  {
    const uint32_t count = u32();
    // Each element takes at least one byte; reject absurd counts up front.
    if (count > remaining()) {
      throw DecodeError("vector length exceeds available data");
    }
    std::vector<T> items;
    items.reserve(count);
    for (uint32_t i = 0; i < count; i++) {
      items.push_back(read_one(*this));
    }
    return items;
  }

  size_t remaining() const { return _data.size() - _pos; }
  bool empty() const { return remaining() == 0; }

  // Throws DecodeError unless all input has been consumed.
  void expect_end() const;

private:
  const uint8_t* need(size_t len);

  const Bytes& _data;
  size_t _pos = 0;
};

} // namespace cgkasim
