#include "cgkasim/codec.hpp"

namespace cgkasim {

void
Writer::u8(uint8_t v)
{
  _out.push_back(v);
}

void
Writer::u16(uint16_t v)
{
  _out.push_back(static_cast<uint8_t>(v >> 8));
  _out.push_back(static_cast<uint8_t>(v));
}

void
Writer::u32(uint32_t v)
{
  for (int shift = 24; shift >= 0; shift -= 8) {
    _out.push_back(static_cast<uint8_t>(v >> shift));
  }
}

void
Writer::u64(uint64_t v)
{
  for (int shift = 56; shift >= 0; shift -= 8) {
    _out.push_back(static_cast<uint8_t>(v >> shift));
  }
}

void
Writer::boolean(bool v)
{
  u8(v ? 1 : 0);
}

void
Writer::raw(const Bytes& data)
{
  _out.insert(_out.end(), data.begin(), data.end());
}

void
Writer::bytes(const Bytes& data)
{
  if (data.size() > UINT32_MAX) {
    throw InvalidParameterError("byte string too large to encode");
  }
  u32(static_cast<uint32_t>(data.size()));
  raw(data);
}

void
Writer::str(const std::string& s)
{
  bytes(Bytes(s.begin(), s.end()));
}

void
Writer::secret(const Secret& s)
{
  _out.insert(_out.end(), s.data.begin(), s.data.end());
}

const uint8_t*
Reader::need(size_t len)
{
  if (remaining() < len) {
    throw DecodeError("unexpected end of input");
  }
  const uint8_t* p = _data.data() + _pos;
  _pos += len;
  return p;
}

uint8_t
Reader::u8()
{
  return *need(1);
}

uint16_t
Reader::u16()
{
  const uint8_t* p = need(2);
  return static_cast<uint16_t>((p[0] << 8) | p[1]);
}

uint32_t
Reader::u32()
{
  const uint8_t* p = need(4);
  uint32_t v = 0;
  for (int i = 0; i < 4; i++) {
    v = (v << 8) | p[i];
  }
  return v;
}

uint64_t
Reader::u64()
{
  const uint8_t* p = need(8);
  uint64_t v = 0;
  for (int i = 0; i < 8; i++) {
    v = (v << 8) | p[i];
  }
  return v;
}

bool
Reader::boolean()
{
  const uint8_t v = u8();
  if (v > 1) {
    throw DecodeError("invalid boolean encoding");
  }
  return v == 1;
}

Bytes
Reader::bytes()
{
  const uint32_t len = u32();
  const uint8_t* p = need(len);
  return Bytes(p, p + len);
}

std::string
Reader::str()
{
  const Bytes b = bytes();
  return std::string(b.begin(), b.end());
}

Secret
Reader::secret()
{
  const uint8_t* p = need(secret_size);
  Secret s;
  std::copy(p, p + secret_size, s.data.begin());
  return s;
}

void
Reader::expect_end() const
{
  if (!empty()) {
    throw DecodeError("trailing bytes after message");
  }
}

} // namespace cgkasim
