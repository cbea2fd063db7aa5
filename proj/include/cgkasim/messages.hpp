#pragma once

#include "cgkasim/bytes.hpp"
#include "cgkasim/codec.hpp"
#include "cgkasim/crypto.hpp"
#include "cgkasim/tree_math.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cgkasim {

using tree_math::LeafIndex;
using tree_math::NodeIndex;

///
/// Leaf nodes and key packages
///

struct LeafNode
{
  std::string identity;
  Bytes signature_public_key;
  Bytes kem_public_key;
  Bytes credential;
  Bytes signature;

  Bytes to_be_signed() const;
  void sign(const CryptoProvider& provider, const Bytes& signature_private_key);
  bool valid(const CryptoProvider& provider) const;

  void encode(Writer& w) const;
  static LeafNode decode(Reader& r);

  friend bool operator==(const LeafNode& lhs, const LeafNode& rhs) = default;
};

// Pre-published material another member uses to add this client to a group.
struct KeyPackage
{
  LeafNode leaf_node;
  Bytes init_public_key;
  Bytes signature;

  Bytes to_be_signed() const;
  bool valid(const CryptoProvider& provider) const;

  // Identifier used to address the package (hash of its serialization).
  Bytes id(const CryptoProvider& provider) const;

  void encode(Writer& w) const;
  static KeyPackage decode(Reader& r);
  Bytes serialize() const;
  static KeyPackage deserialize(const Bytes& data);

  friend bool operator==(const KeyPackage& lhs, const KeyPackage& rhs) = default;
};

// The private half a client keeps when it publishes a KeyPackage.
struct KeyPackagePrivate
{
  KeyPackage key_package;
  Bytes init_private_key;
  Bytes leaf_kem_private_key;
  Bytes signature_private_key;
};

KeyPackagePrivate new_key_package(const CryptoProvider& provider,
                                  RandomSource& rng,
                                  const std::string& identity);

// Same, but reusing an existing signature key pair (identity continuity).
KeyPackagePrivate new_key_package(const CryptoProvider& provider,
                                  RandomSource& rng,
                                  const std::string& identity,
                                  const SignatureKeyPair& signature_keys);

///
/// Proposals
///

enum class ProposalKind : uint8_t
{
  add = 1,
  remove = 2,
  update = 3,
};

struct AddProposal
{
  KeyPackage key_package;

  friend bool operator==(const AddProposal&, const AddProposal&) = default;
};

struct RemoveProposal
{
  LeafIndex removed;

  friend bool operator==(const RemoveProposal&, const RemoveProposal&) = default;
};

struct UpdateProposal
{
  LeafIndex leaf;
  LeafNode leaf_node;

  friend bool operator==(const UpdateProposal&, const UpdateProposal&) = default;
};

struct Proposal
{
  std::variant<AddProposal, RemoveProposal, UpdateProposal> content;

  ProposalKind kind() const;

  void encode(Writer& w) const;
  static Proposal decode(Reader& r);
  Bytes serialize() const;

  // Content-addressed identifier: hash of the serialized proposal.
  Bytes id(const CryptoProvider& provider) const;

  friend bool operator==(const Proposal& lhs, const Proposal& rhs) = default;
};

///
/// Commits
///

struct UpdatePathNode
{
  Bytes public_key;
  // One ciphertext per node in the resolution of the copath child, in order.
  std::vector<HpkeCiphertext> encrypted_path_secrets;

  friend bool operator==(const UpdatePathNode&, const UpdatePathNode&) = default;
};

struct UpdatePath
{
  LeafNode leaf_node;
  // One entry per node on the committer's filtered direct path, leaf to root.
  std::vector<UpdatePathNode> nodes;

  void encode(Writer& w) const;
  static UpdatePath decode(Reader& r);

  friend bool operator==(const UpdatePath&, const UpdatePath&) = default;
};

struct Commit
{
  // Full copies of the proposals this commit applies, in application order.
  std::vector<Proposal> proposals;
  UpdatePath path;
  // Present only on external commits: KEM ciphertext against the group's
  // external public key.
  std::optional<Bytes> external_kem_ciphertext;

  void encode(Writer& w) const;
  static Commit decode(Reader& r);

  friend bool operator==(const Commit&, const Commit&) = default;
};

///
/// Handshake framing
///

struct Sender
{
  enum class Type : uint8_t
  {
    member = 1,
    external = 2,
  };

  Type type = Type::member;
  // For members: the sender's leaf. For external commits: the leaf the joiner
  // claims (receivers verify it is the one the join rules would assign).
  LeafIndex leaf = 0;

  friend bool operator==(const Sender&, const Sender&) = default;
};

struct HandshakeMessage
{
  std::string group_id;
  uint64_t epoch = 0;
  Sender sender;
  std::variant<Proposal, Commit> content;
  // Commits only: MAC binding the new epoch's transcript; kept outside the
  // content so the transcript can cover the content without circularity.
  std::optional<Bytes> confirmation_tag;
  Bytes signature;
  // MAC under the epoch's membership key; absent on external commits, whose
  // senders do not hold group secrets yet.
  std::optional<Bytes> membership_tag;

  bool is_commit() const { return std::holds_alternative<Commit>(content); }
  const Commit& commit() const { return std::get<Commit>(content); }
  const Proposal& proposal() const { return std::get<Proposal>(content); }

  // Transcript input: everything up to and including the content.
  Bytes content_tbs() const;
  // Signature input: content_tbs plus the confirmation tag when present.
  Bytes to_be_signed() const;
  // Membership MAC input: to_be_signed plus the signature.
  Bytes membership_data() const;

  Bytes serialize() const;
  static HandshakeMessage deserialize(const Bytes& data);

  friend bool operator==(const HandshakeMessage&, const HandshakeMessage&) = default;
};

///
/// Application data
///

struct ApplicationMessage
{
  std::string group_id;
  uint64_t epoch = 0;
  LeafIndex sender = 0;
  uint64_t sequence = 0;
  Bytes ciphertext;

  Bytes aad() const;

  Bytes serialize() const;
  static ApplicationMessage deserialize(const Bytes& data);

  friend bool operator==(const ApplicationMessage&, const ApplicationMessage&) = default;
};

} // namespace cgkasim
