#include <doctest.h>

#include <cgkasim/crypto.hpp>
#include <cgkasim/errors.hpp>

using namespace cgkasim;

TEST_SUITE_BEGIN("crypto");

// Public known-answer vectors pin each provider's hash to the algorithm it
// documents: SHA-256("abc") and BLAKE2b-256("abc").
TEST_CASE("hash known answers")
{
  CHECK(to_hex(sodium_provider()->hash(from_ascii("abc"))) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(to_hex(mock_provider()->hash(from_ascii("abc"))) ==
        "bddd813c634239723171ef3fee98579b94964e3bb1cb3e427262c8c068d52319");
}

// Frozen first outputs guard the derivation layer against silent change;
// a change here invalidates every stored group state.
TEST_CASE("kdf and mac frozen vectors")
{
  const Secret zero;
  CHECK(to_hex(sodium_provider()->kdf(zero, "epoch", { 1, 2, 3 }).to_bytes()) ==
        "e6fbd6c94c108b539804cf45d3b92918027eabc69db4923608a1d0703a6a777e");
  CHECK(to_hex(mock_provider()->kdf(zero, "epoch", { 1, 2, 3 }).to_bytes()) ==
        "0b57a0e4656a5138d48a6d76a5756f2d2d4831f40c5c11eaace302d77c656b85");
  CHECK(to_hex(sodium_provider()->mac(zero, from_ascii("abc"))) ==
        "fd7adb152c05ef80dccf50a1fa4c05d5a3ec6da95575fc312ae7c5d091836351");
  CHECK(to_hex(mock_provider()->mac(zero, from_ascii("abc"))) ==
        "bad705ff155af631f38dc6cafdda827a31595c802f3ff585c10691c58944d89b");
}

TEST_CASE("kdf separates labels and contexts")
{
  for (const auto* name : { "sodium", "mock" }) {
    CAPTURE(name);
    auto p = make_provider(name);
    const Secret zero;
    const auto a = p->kdf(zero, "alpha", {});
    CHECK(a == p->kdf(zero, "alpha", {}));
    CHECK_FALSE(a == p->kdf(zero, "beta", {}));
    CHECK_FALSE(a == p->kdf(zero, "alpha", { 1 }));
  }
}

TEST_CASE("kem encapsulation round trip")
{
  for (const auto* name : { "sodium", "mock" }) {
    CAPTURE(name);
    auto p = make_provider(name);
    DeterministicRandom rng(1);
    const auto keys = p->kem_generate(rng);
    const auto out = p->kem_encap(keys.public_key, rng);
    CHECK(p->kem_decap(keys.private_key, out.ciphertext) == out.shared);

    const auto other = p->kem_generate(rng);
    bool mismatch_detected = false;
    try {
      mismatch_detected =
        !(p->kem_decap(other.private_key, out.ciphertext) == out.shared);
    } catch (const DecapError&) {
      mismatch_detected = true;
    }
    CHECK(mismatch_detected);
  }
}

TEST_CASE("kem_derive is deterministic and consistent with encap")
{
  for (const auto* name : { "sodium", "mock" }) {
    CAPTURE(name);
    auto p = make_provider(name);
    Secret seed;
    seed.data[0] = 42;
    const auto a = p->kem_derive(seed);
    const auto b = p->kem_derive(seed);
    CHECK(a.public_key == b.public_key);
    CHECK(a.private_key == b.private_key);

    DeterministicRandom rng(3);
    const auto out = p->kem_encap(a.public_key, rng);
    CHECK(p->kem_decap(a.private_key, out.ciphertext) == out.shared);
  }
}

TEST_CASE("aead round trip, tamper detection, and aad binding")
{
  for (const auto* name : { "sodium", "mock" }) {
    CAPTURE(name);
    auto p = make_provider(name);
    Secret key;
    key.data[1] = 9;
    const Bytes nonce(CryptoProvider::aead_nonce_size, 0x24);
    const auto aad = from_ascii("header");
    const auto plaintext = from_ascii("attack at dawn");

    auto ct = p->aead_seal(key, nonce, aad, plaintext);
    CHECK(p->aead_open(key, nonce, aad, ct) == plaintext);

    auto tampered = ct;
    tampered[0] ^= 1;
    CHECK_THROWS_AS(p->aead_open(key, nonce, aad, tampered), AeadError);
    CHECK_THROWS_AS(p->aead_open(key, nonce, from_ascii("other"), ct), AeadError);

    Secret wrong = key;
    wrong.data[0] ^= 1;
    CHECK_THROWS_AS(p->aead_open(wrong, nonce, aad, ct), AeadError);
  }
}

TEST_CASE("signatures verify and reject forgeries")
{
  for (const auto* name : { "sodium", "mock" }) {
    CAPTURE(name);
    auto p = make_provider(name);
    DeterministicRandom rng(5);
    const auto keys = p->sig_generate(rng);
    const auto message = from_ascii("statement");
    const auto sig = p->sign(keys.private_key, message);
    CHECK(p->verify(keys.public_key, message, sig));
    CHECK_FALSE(p->verify(keys.public_key, from_ascii("other"), sig));

    auto bad = sig;
    bad[0] ^= 1;
    CHECK_FALSE(p->verify(keys.public_key, message, bad));

    const auto other = p->sig_generate(rng);
    CHECK_FALSE(p->verify(other.public_key, message, sig));
  }
}

TEST_CASE("seal_to and open_from round trip")
{
  for (const auto* name : { "sodium", "mock" }) {
    CAPTURE(name);
    auto p = make_provider(name);
    DeterministicRandom rng(8);
    const auto keys = p->kem_generate(rng);
    const auto aad = from_ascii("binding");
    const auto plaintext = from_ascii("path secret");

    const auto ct = p->seal_to(keys.public_key, rng, aad, plaintext);
    CHECK(p->open_from(keys.private_key, ct, aad) == plaintext);

    const auto other = p->kem_generate(rng);
    CHECK_THROWS(p->open_from(other.private_key, ct, aad));
  }
}

TEST_CASE("deterministic rng replays and diverges by seed")
{
  DeterministicRandom a(7);
  DeterministicRandom b(7);
  DeterministicRandom c(8);
  const auto sample = a.bytes(64);
  CHECK(sample == b.bytes(64));
  CHECK(sample != c.bytes(64));
  // frozen stream prefix: a change here breaks replayability of stored runs
  DeterministicRandom d(7);
  CHECK(to_hex(d.bytes(16)) == "5fcea58240d3360c0d2db06d279ecb60");
}

TEST_CASE("deterministic rng helpers stay in range")
{
  DeterministicRandom rng(11);
  for (int i = 0; i < 200; i++) {
    const auto v = rng.uniform_u64(10, 20);
    CHECK(v >= 10);
    CHECK(v <= 20);
    const auto real = rng.uniform_real(0.25, 0.75);
    CHECK(real >= 0.25);
    CHECK(real <= 0.75);
    CHECK(rng.pick_index(7) < 7);
  }
  int heads = 0;
  for (int i = 0; i < 400; i++) {
    heads += rng.chance(0.5) ? 1 : 0;
  }
  CHECK(heads > 120);
  CHECK(heads < 280);
  CHECK_FALSE(rng.chance(0.0));
  CHECK(rng.chance(1.0));
}

// published reference sequence for seed 0
TEST_CASE("splitmix64 matches the reference stream")
{
  uint64_t state = 0;
  CHECK(splitmix64(state) == 0xe220a8397b1dcdaf);
  CHECK(splitmix64(state) == 0x6e789e6aa1b965f4);
  CHECK(splitmix64(state) == 0x06c45d188009454f);
}

TEST_CASE("provider lookup")
{
  CHECK(make_provider("sodium")->name() == "sodium");
  CHECK(make_provider("mock")->name() == "mock");
  CHECK_THROWS_AS(make_provider("nope"), InvalidParameterError);
}

TEST_SUITE_END();
