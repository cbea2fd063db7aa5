#include "cgkasim/crypto.hpp"

#include "cgkasim/codec.hpp"
#include "cgkasim/errors.hpp"

#include <cstring>
#include <sodium.h>

namespace cgkasim {

namespace {

struct SodiumInit
{
  SodiumInit()
  {
    if (sodium_init() < 0) {
      throw Error("libsodium initialization failed");
    }
  }
};

void
ensure_sodium()
{
  static SodiumInit init;
}

Bytes
label_context(const std::string& label, const Bytes& context)
{
  Writer w;
  w.str("cgka/v1/" + label);
  w.bytes(context);
  return w.take();
}

Bytes
chacha_seal(const Secret& key, const Bytes& nonce, const Bytes& aad, const Bytes& plaintext)
{
  ensure_sodium();
  if (nonce.size() != crypto_aead_chacha20poly1305_ietf_NPUBBYTES) {
    throw InvalidParameterError("AEAD nonce must be 12 bytes");
  }
  Bytes out(plaintext.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long out_len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data(),
                                            &out_len,
                                            plaintext.data(),
                                            plaintext.size(),
                                            aad.data(),
                                            aad.size(),
                                            nullptr,
                                            nonce.data(),
                                            key.data.data());
  out.resize(out_len);
  return out;
}

Bytes
chacha_open(const Secret& key, const Bytes& nonce, const Bytes& aad, const Bytes& ciphertext)
{
  ensure_sodium();
  if (nonce.size() != crypto_aead_chacha20poly1305_ietf_NPUBBYTES) {
    throw InvalidParameterError("AEAD nonce must be 12 bytes");
  }
  if (ciphertext.size() < crypto_aead_chacha20poly1305_ietf_ABYTES) {
    throw AeadError("ciphertext shorter than authentication tag");
  }
  Bytes out(ciphertext.size() - crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long out_len = 0;
  const int rv = crypto_aead_chacha20poly1305_ietf_decrypt(out.data(),
                                                           &out_len,
                                                           nullptr,
                                                           ciphertext.data(),
                                                           ciphertext.size(),
                                                           aad.data(),
                                                           aad.size(),
                                                           nonce.data(),
                                                           key.data.data());
  if (rv != 0) {
    throw AeadError("AEAD authentication failed");
  }
  out.resize(out_len);
  return out;
}

Bytes
blake2(const Bytes& data, const uint8_t* key, size_t key_len)
{
  ensure_sodium();
  Bytes out(secret_size);
  crypto_generichash(out.data(), out.size(), data.data(), data.size(), key, key_len);
  return out;
}

Bytes
blake2_tagged(const std::string& tag, std::initializer_list<Bytes> parts)
{
  Writer w;
  w.str(tag);
  for (const auto& p : parts) {
    w.bytes(p);
  }
  return blake2(w.out(), nullptr, 0);
}

///
/// libsodium-backed production suite
///

class SodiumProvider : public CryptoProvider
{
public:
  SodiumProvider() { ensure_sodium(); }

  std::string name() const override { return "sodium"; }

  Bytes hash(const Bytes& data) const override
  {
    Bytes out(crypto_hash_sha256_BYTES);
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
  }

  Secret kdf(const Secret& secret, const std::string& label, const Bytes& context) const override
  {
    const Bytes input = label_context(label, context);
    Secret out;
    crypto_auth_hmacsha256(out.data.data(), input.data(), input.size(), secret.data.data());
    return out;
  }

  Bytes mac(const Secret& key, const Bytes& data) const override
  {
    Bytes out(crypto_auth_hmacsha256_BYTES);
    crypto_auth_hmacsha256(out.data(), data.data(), data.size(), key.data.data());
    return out;
  }

  KemKeyPair kem_generate(RandomSource& rng) const override
  {
    return kem_derive(rng.secret());
  }

  KemKeyPair kem_derive(const Secret& seed) const override
  {
    KemKeyPair kp;
    kp.private_key = seed.to_bytes();
    kp.public_key.resize(crypto_scalarmult_BYTES);
    crypto_scalarmult_base(kp.public_key.data(), kp.private_key.data());
    return kp;
  }

  KemOutput kem_encap(const Bytes& public_key, RandomSource& rng) const override
  {
    if (public_key.size() != crypto_scalarmult_BYTES) {
      throw DecapError("malformed KEM public key");
    }
    const KemKeyPair eph = kem_generate(rng);
    KemOutput out;
    out.ciphertext = eph.public_key;
    out.shared = combine_dh(eph.private_key, public_key, eph.public_key, public_key);
    return out;
  }

  Secret kem_decap(const Bytes& private_key, const Bytes& ciphertext) const override
  {
    if (private_key.size() != crypto_scalarmult_SCALARBYTES) {
      throw DecapError("malformed KEM private key");
    }
    if (ciphertext.size() != crypto_scalarmult_BYTES) {
      throw DecapError("malformed KEM ciphertext");
    }
    Bytes pub(crypto_scalarmult_BYTES);
    crypto_scalarmult_base(pub.data(), private_key.data());
    return combine_dh(private_key, ciphertext, ciphertext, pub);
  }

  Bytes aead_seal(const Secret& key,
                  const Bytes& nonce,
                  const Bytes& aad,
                  const Bytes& plaintext) const override
  {
    return chacha_seal(key, nonce, aad, plaintext);
  }

  Bytes aead_open(const Secret& key,
                  const Bytes& nonce,
                  const Bytes& aad,
                  const Bytes& ciphertext) const override
  {
    return chacha_open(key, nonce, aad, ciphertext);
  }

  SignatureKeyPair sig_generate(RandomSource& rng) const override
  {
    const Secret seed = rng.secret();
    SignatureKeyPair kp;
    kp.private_key.resize(crypto_sign_SECRETKEYBYTES);
    kp.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    crypto_sign_seed_keypair(kp.public_key.data(), kp.private_key.data(), seed.data.data());
    return kp;
  }

  Bytes sign(const Bytes& private_key, const Bytes& message) const override
  {
    if (private_key.size() != crypto_sign_SECRETKEYBYTES) {
      throw SignatureError("malformed signature private key");
    }
    Bytes sig(crypto_sign_BYTES);
    unsigned long long sig_len = 0;
    crypto_sign_detached(sig.data(), &sig_len, message.data(), message.size(), private_key.data());
    sig.resize(sig_len);
    return sig;
  }

  bool verify(const Bytes& public_key, const Bytes& message, const Bytes& signature) const override
  {
    if (public_key.size() != crypto_sign_PUBLICKEYBYTES ||
        signature.size() != crypto_sign_BYTES) {
      return false;
    }
    return crypto_sign_verify_detached(
             signature.data(), message.data(), message.size(), public_key.data()) == 0;
  }

private:
  // shared = HMAC(key = DH(sk, pk), enc || recipient_pub), binding the shared
  // secret to the exact key pair it was encapsulated for.
  Secret combine_dh(const Bytes& scalar,
                    const Bytes& point,
                    const Bytes& enc,
                    const Bytes& recipient_pub) const
  {
    Bytes dh(crypto_scalarmult_BYTES);
    if (crypto_scalarmult(dh.data(), scalar.data(), point.data()) != 0) {
      throw DecapError("degenerate Diffie-Hellman result");
    }
    Writer w;
    w.bytes(enc);
    w.bytes(recipient_pub);
    Secret key;
    std::copy(dh.begin(), dh.end(), key.data.begin());
    Secret out;
    const Bytes input = label_context("kem", w.out());
    crypto_auth_hmacsha256(out.data.data(), input.data(), input.size(), key.data.data());
    return out;
  }
};

///
/// Hash-based fast suite
///

class MockProvider : public CryptoProvider
{
public:
  MockProvider() { ensure_sodium(); }

  std::string name() const override { return "mock"; }

  Bytes hash(const Bytes& data) const override { return blake2(data, nullptr, 0); }

  Secret kdf(const Secret& secret, const std::string& label, const Bytes& context) const override
  {
    const Bytes input = label_context(label, context);
    return Secret(blake2(input, secret.data.data(), secret.data.size()));
  }

  Bytes mac(const Secret& key, const Bytes& data) const override
  {
    return blake2(data, key.data.data(), key.data.size());
  }

  KemKeyPair kem_generate(RandomSource& rng) const override
  {
    return kem_derive(rng.secret());
  }

  KemKeyPair kem_derive(const Secret& seed) const override
  {
    KemKeyPair kp;
    kp.private_key = seed.to_bytes();
    kp.public_key = blake2_tagged("kem-pk", { kp.private_key });
    return kp;
  }

  KemOutput kem_encap(const Bytes& public_key, RandomSource& rng) const override
  {
    if (public_key.size() != secret_size) {
      throw DecapError("malformed KEM public key");
    }
    KemOutput out;
    out.ciphertext = rng.bytes(secret_size);
    out.shared = Secret(blake2_tagged("kem-ss", { public_key, out.ciphertext }));
    return out;
  }

  Secret kem_decap(const Bytes& private_key, const Bytes& ciphertext) const override
  {
    if (private_key.size() != secret_size) {
      throw DecapError("malformed KEM private key");
    }
    if (ciphertext.size() != secret_size) {
      throw DecapError("malformed KEM ciphertext");
    }
    const Bytes public_key = blake2_tagged("kem-pk", { private_key });
    return Secret(blake2_tagged("kem-ss", { public_key, ciphertext }));
  }

  Bytes aead_seal(const Secret& key,
                  const Bytes& nonce,
                  const Bytes& aad,
                  const Bytes& plaintext) const override
  {
    return chacha_seal(key, nonce, aad, plaintext);
  }

  Bytes aead_open(const Secret& key,
                  const Bytes& nonce,
                  const Bytes& aad,
                  const Bytes& ciphertext) const override
  {
    return chacha_open(key, nonce, aad, ciphertext);
  }

  SignatureKeyPair sig_generate(RandomSource& rng) const override
  {
    SignatureKeyPair kp;
    kp.private_key = rng.bytes(secret_size);
    kp.public_key = blake2_tagged("sig-pk", { kp.private_key });
    return kp;
  }

  Bytes sign(const Bytes& private_key, const Bytes& message) const override
  {
    if (private_key.size() != secret_size) {
      throw SignatureError("malformed signature private key");
    }
    const Bytes public_key = blake2_tagged("sig-pk", { private_key });
    return blake2_tagged("sig", { public_key, message });
  }

  bool verify(const Bytes& public_key, const Bytes& message, const Bytes& signature) const override
  {
    return signature == blake2_tagged("sig", { public_key, message });
  }
};

} // namespace

HpkeCiphertext
CryptoProvider::seal_to(const Bytes& kem_public_key,
                        RandomSource& rng,
                        const Bytes& aad,
                        const Bytes& plaintext) const
{
  const KemOutput enc = kem_encap(kem_public_key, rng);
  const Bytes nonce(aead_nonce_size, 0);
  return { enc.ciphertext, aead_seal(enc.shared, nonce, aad, plaintext) };
}

Bytes
CryptoProvider::open_from(const Bytes& kem_private_key,
                          const HpkeCiphertext& ct,
                          const Bytes& aad) const
{
  const Secret shared = kem_decap(kem_private_key, ct.kem_ciphertext);
  const Bytes nonce(aead_nonce_size, 0);
  return aead_open(shared, nonce, aad, ct.ciphertext);
}

std::shared_ptr<const CryptoProvider>
sodium_provider()
{
  static auto provider = std::make_shared<const SodiumProvider>();
  return provider;
}

std::shared_ptr<const CryptoProvider>
mock_provider()
{
  static auto provider = std::make_shared<const MockProvider>();
  return provider;
}

std::shared_ptr<const CryptoProvider>
make_provider(const std::string& name)
{
  if (name == "sodium") {
    return sodium_provider();
  }
  if (name == "mock") {
    return mock_provider();
  }
  throw InvalidParameterError("unknown crypto provider: " + name);
}

} // namespace cgkasim
