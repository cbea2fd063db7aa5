#include <doctest.h>

#include <cgkasim/codec.hpp>

using namespace cgkasim;

TEST_SUITE_BEGIN("codec");

TEST_CASE("integers are big-endian fixed width")
{
  Writer w;
  w.u8(0xab);
  w.u16(0x0102);
  w.u32(0x01020304);
  w.u64(0x0102030405060708);

  const Bytes expected = { 0xab, 0x01, 0x02, 0x01, 0x02, 0x03, 0x04,
                           0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08 };
  CHECK(w.out() == expected);

  Reader r(w.out());
  CHECK(r.u8() == 0xab);
  CHECK(r.u16() == 0x0102);
  CHECK(r.u32() == 0x01020304);
  CHECK(r.u64() == 0x0102030405060708);
  CHECK(r.empty());
}

TEST_CASE("round trip covers every field type")
{
  Writer w;
  w.boolean(true);
  w.boolean(false);
  w.bytes({ 1, 2, 3 });
  w.str("hello");
  w.bytes({});
  Secret s;
  for (size_t i = 0; i < s.data.size(); i++) {
    s.data[i] = static_cast<uint8_t>(i);
  }
  w.secret(s);
  w.vec(std::vector<uint32_t>{ 7, 8, 9 },
        [](Writer& ww, uint32_t v) { ww.u32(v); });

  Reader r(w.out());
  CHECK(r.boolean());
  CHECK_FALSE(r.boolean());
  CHECK(r.bytes() == Bytes{ 1, 2, 3 });
  CHECK(r.str() == "hello");
  CHECK(r.bytes().empty());
  CHECK(r.secret() == s);
  auto vec = r.vec<uint32_t>([](Reader& rr) { return rr.u32(); });
  CHECK(vec == std::vector<uint32_t>{ 7, 8, 9 });
  CHECK_NOTHROW(r.expect_end());
}

TEST_CASE("length prefix is 32-bit")
{
  Writer w;
  w.bytes({ 0xaa, 0xbb });
  const Bytes expected = { 0x00, 0x00, 0x00, 0x02, 0xaa, 0xbb };
  CHECK(w.out() == expected);
}

TEST_CASE("truncated input throws instead of reading past the end")
{
  Writer w;
  w.u32(42);
  Bytes data = w.out();
  data.pop_back();
  Reader r(data);
  CHECK_THROWS_AS(r.u32(), DecodeError);
}

TEST_CASE("bogus length prefix is rejected")
{
  const Bytes data = { 0xff, 0xff, 0xff, 0xff, 0x01 };
  Reader r(data);
  CHECK_THROWS_AS(r.bytes(), DecodeError);
}

TEST_CASE("oversized vector count is rejected before allocation")
{
  Writer w;
  w.u32(0x7fffffff);
  Reader r(w.out());
  CHECK_THROWS_AS(r.vec<uint8_t>([](Reader& rr) { return rr.u8(); }),
                  DecodeError);
}

TEST_CASE("expect_end rejects trailing garbage")
{
  Writer w;
  w.u8(1);
  w.u8(2);
  Reader r(w.out());
  r.u8();
  CHECK_THROWS_AS(r.expect_end(), DecodeError);
}

TEST_CASE("boolean bytes other than 0 and 1 are rejected")
{
  const Bytes data = { 0x02 };
  Reader r(data);
  CHECK_THROWS_AS(r.boolean(), DecodeError);
}

TEST_SUITE_END();
