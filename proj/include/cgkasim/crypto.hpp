#pragma once

#include "cgkasim/bytes.hpp"
#include "cgkasim/random.hpp"

#include <memory>
#include <string>

namespace cgkasim {

struct KemKeyPair
{
  Bytes private_key;
  Bytes public_key;
};

struct KemOutput
{
  Bytes ciphertext;
  Secret shared;
};

struct SignatureKeyPair
{
  Bytes private_key;
  Bytes public_key;
};

struct HpkeCiphertext
{
  Bytes kem_ciphertext;
  Bytes ciphertext;

  friend bool operator==(const HpkeCiphertext&, const HpkeCiphertext&) = default;
};

// Pluggable cryptography. Implementations are stateless and thread-safe; all
// entropy comes in through an explicit RandomSource so deterministic replay
// stays possible end to end.
class CryptoProvider
{
public:
  virtual ~CryptoProvider() = default;

  virtual std::string name() const = 0;

  /// Hashing and key derivation (all outputs are 32 bytes).

  virtual Bytes hash(const Bytes& data) const = 0;
  virtual Secret kdf(const Secret& secret,
                     const std::string& label,
                     const Bytes& context) const = 0;
  virtual Bytes mac(const Secret& key, const Bytes& data) const = 0;

  /// KEM

  virtual KemKeyPair kem_generate(RandomSource& rng) const = 0;
  virtual KemKeyPair kem_derive(const Secret& seed) const = 0;
  virtual KemOutput kem_encap(const Bytes& public_key, RandomSource& rng) const = 0;
  // Decapsulating with the wrong (but well-formed) key pair may either throw
  // DecapError or return a secret that differs from the encapsulated one; any
  // AEAD layered above must then fail. Malformed input always throws.
  virtual Secret kem_decap(const Bytes& private_key, const Bytes& ciphertext) const = 0;

  /// AEAD

  virtual Bytes aead_seal(const Secret& key,
                          const Bytes& nonce,
                          const Bytes& aad,
                          const Bytes& plaintext) const = 0;
  // Throws AeadError on any authentication failure.
  virtual Bytes aead_open(const Secret& key,
                          const Bytes& nonce,
                          const Bytes& aad,
                          const Bytes& ciphertext) const = 0;

  /// Signatures

  virtual SignatureKeyPair sig_generate(RandomSource& rng) const = 0;
  virtual Bytes sign(const Bytes& private_key, const Bytes& message) const = 0;
  virtual bool verify(const Bytes& public_key,
                      const Bytes& message,
                      const Bytes& signature) const = 0;

  /// Composed helpers (same behavior for every provider).

  // Encrypt to a KEM public key: encapsulate, then AEAD-seal under the shared
  // secret with a zero nonce (each shared secret is single-use by design).
  HpkeCiphertext seal_to(const Bytes& kem_public_key,
                         RandomSource& rng,
                         const Bytes& aad,
                         const Bytes& plaintext) const;
  Bytes open_from(const Bytes& kem_private_key,
                  const HpkeCiphertext& ct,
                  const Bytes& aad) const;

  static constexpr size_t aead_nonce_size = 12;
};

// Production suite backed by libsodium: X25519 KEM, Ed25519 signatures,
// ChaCha20-Poly1305 AEAD, SHA-256 hashing, HMAC-SHA256 key derivation.
std::shared_ptr<const CryptoProvider> sodium_provider();

// Fast deterministic suite for simulation at scale: hash-based toy KEM and
// signatures (BLAKE2b) with the real AEAD on top. Not secure; decapsulating
// with a mismatched key yields an unequal secret and the AEAD then rejects.
std::shared_ptr<const CryptoProvider> mock_provider();

// Lookup by name ("sodium" or "mock"); throws InvalidParameterError otherwise.
std::shared_ptr<const CryptoProvider> make_provider(const std::string& name);

} // namespace cgkasim
