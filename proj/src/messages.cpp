#include "cgkasim/messages.hpp"

#include "cgkasim/errors.hpp"

namespace cgkasim {

// Wire type tags for top-level objects.
namespace wire {
constexpr uint8_t key_package = 1;
constexpr uint8_t handshake = 2;
constexpr uint8_t application = 5;
} // namespace wire

static void
check_header(Reader& r, uint8_t expected_type)
{
  const uint8_t version = r.u8();
  if (version != wire_format_version) {
    throw DecodeError("unsupported wire format version");
  }
  const uint8_t type = r.u8();
  if (type != expected_type) {
    throw DecodeError("unexpected message type");
  }
}

static void
write_header(Writer& w, uint8_t type)
{
  w.u8(wire_format_version);
  w.u8(type);
}

///
/// LeafNode
///

Bytes
LeafNode::to_be_signed() const
{
  Writer w;
  w.str("LeafNodeTBS");
  w.str(identity);
  w.bytes(signature_public_key);
  w.bytes(kem_public_key);
  w.bytes(credential);
  return w.take();
}

void
LeafNode::sign(const CryptoProvider& provider, const Bytes& signature_private_key)
{
  signature = provider.sign(signature_private_key, to_be_signed());
}

bool
LeafNode::valid(const CryptoProvider& provider) const
{
  return !kem_public_key.empty() &&
         provider.verify(signature_public_key, to_be_signed(), signature);
}

void
LeafNode::encode(Writer& w) const
{
  w.str(identity);
  w.bytes(signature_public_key);
  w.bytes(kem_public_key);
  w.bytes(credential);
  w.bytes(signature);
}

LeafNode
LeafNode::decode(Reader& r)
{
  LeafNode leaf;
  leaf.identity = r.str();
  leaf.signature_public_key = r.bytes();
  leaf.kem_public_key = r.bytes();
  leaf.credential = r.bytes();
  leaf.signature = r.bytes();
  return leaf;
}

///
/// KeyPackage
///

Bytes
KeyPackage::to_be_signed() const
{
  Writer w;
  w.str("KeyPackageTBS");
  leaf_node.encode(w);
  w.bytes(init_public_key);
  return w.take();
}

bool
KeyPackage::valid(const CryptoProvider& provider) const
{
  return leaf_node.valid(provider) && !init_public_key.empty() &&
         provider.verify(leaf_node.signature_public_key, to_be_signed(), signature);
}

Bytes
KeyPackage::id(const CryptoProvider& provider) const
{
  return provider.hash(serialize());
}

void
KeyPackage::encode(Writer& w) const
{
  leaf_node.encode(w);
  w.bytes(init_public_key);
  w.bytes(signature);
}

KeyPackage
KeyPackage::decode(Reader& r)
{
  KeyPackage kp;
  kp.leaf_node = LeafNode::decode(r);
  kp.init_public_key = r.bytes();
  kp.signature = r.bytes();
  return kp;
}

Bytes
KeyPackage::serialize() const
{
  Writer w;
  write_header(w, wire::key_package);
  encode(w);
  return w.take();
}

KeyPackage
KeyPackage::deserialize(const Bytes& data)
{
  Reader r(data);
  check_header(r, wire::key_package);
  auto kp = decode(r);
  r.expect_end();
  return kp;
}

KeyPackagePrivate
new_key_package(const CryptoProvider& provider, RandomSource& rng, const std::string& identity)
{
  return new_key_package(provider, rng, identity, provider.sig_generate(rng));
}

KeyPackagePrivate
new_key_package(const CryptoProvider& provider,
                RandomSource& rng,
                const std::string& identity,
                const SignatureKeyPair& signature_keys)
{
  const KemKeyPair leaf_keys = provider.kem_generate(rng);
  const KemKeyPair init_keys = provider.kem_generate(rng);

  KeyPackagePrivate kpp;
  kpp.key_package.leaf_node.identity = identity;
  kpp.key_package.leaf_node.signature_public_key = signature_keys.public_key;
  kpp.key_package.leaf_node.kem_public_key = leaf_keys.public_key;
  kpp.key_package.leaf_node.credential = from_ascii("basic:" + identity);
  kpp.key_package.leaf_node.sign(provider, signature_keys.private_key);
  kpp.key_package.init_public_key = init_keys.public_key;
  kpp.key_package.signature =
    provider.sign(signature_keys.private_key, kpp.key_package.to_be_signed());

  kpp.init_private_key = init_keys.private_key;
  kpp.leaf_kem_private_key = leaf_keys.private_key;
  kpp.signature_private_key = signature_keys.private_key;
  return kpp;
}

///
/// Proposal
///

ProposalKind
Proposal::kind() const
{
  if (std::holds_alternative<AddProposal>(content)) {
    return ProposalKind::add;
  }
  if (std::holds_alternative<RemoveProposal>(content)) {
    return ProposalKind::remove;
  }
  return ProposalKind::update;
}

void
Proposal::encode(Writer& w) const
{
  w.u8(static_cast<uint8_t>(kind()));
  switch (kind()) {
    case ProposalKind::add:
      std::get<AddProposal>(content).key_package.encode(w);
      break;
    case ProposalKind::remove:
      w.u32(std::get<RemoveProposal>(content).removed);
      break;
    case ProposalKind::update: {
      const auto& update = std::get<UpdateProposal>(content);
      w.u32(update.leaf);
      update.leaf_node.encode(w);
      break;
    }
  }
}

Proposal
Proposal::decode(Reader& r)
{
  Proposal p;
  const uint8_t kind = r.u8();
  switch (kind) {
    case static_cast<uint8_t>(ProposalKind::add):
      p.content = AddProposal{ KeyPackage::decode(r) };
      break;
    case static_cast<uint8_t>(ProposalKind::remove):
      p.content = RemoveProposal{ r.u32() };
      break;
    case static_cast<uint8_t>(ProposalKind::update): {
      UpdateProposal update;
      update.leaf = r.u32();
      update.leaf_node = LeafNode::decode(r);
      p.content = update;
      break;
    }
    default:
      throw DecodeError("unknown proposal kind");
  }
  return p;
}

Bytes
Proposal::serialize() const
{
  Writer w;
  encode(w);
  return w.take();
}

Bytes
Proposal::id(const CryptoProvider& provider) const
{
  return provider.hash(serialize());
}

///
/// UpdatePath and Commit
///

void
UpdatePath::encode(Writer& w) const
{
  leaf_node.encode(w);
  w.vec(nodes, [](Writer& wr, const UpdatePathNode& node) {
    wr.bytes(node.public_key);
    wr.vec(node.encrypted_path_secrets, [](Writer& wr2, const HpkeCiphertext& ct) {
      wr2.bytes(ct.kem_ciphertext);
      wr2.bytes(ct.ciphertext);
    });
  });
}

UpdatePath
UpdatePath::decode(Reader& r)
{
  UpdatePath path;
  path.leaf_node = LeafNode::decode(r);
  path.nodes = r.vec<UpdatePathNode>([](Reader& rd) {
    UpdatePathNode node;
    node.public_key = rd.bytes();
    node.encrypted_path_secrets = rd.vec<HpkeCiphertext>([](Reader& rd2) {
      HpkeCiphertext ct;
      ct.kem_ciphertext = rd2.bytes();
      ct.ciphertext = rd2.bytes();
      return ct;
    });
    return node;
  });
  return path;
}

void
Commit::encode(Writer& w) const
{
  w.vec(proposals, [](Writer& wr, const Proposal& p) { p.encode(wr); });
  path.encode(w);
  w.boolean(external_kem_ciphertext.has_value());
  if (external_kem_ciphertext) {
    w.bytes(*external_kem_ciphertext);
  }
}

Commit
Commit::decode(Reader& r)
{
  Commit c;
  c.proposals = r.vec<Proposal>([](Reader& rd) { return Proposal::decode(rd); });
  c.path = UpdatePath::decode(r);
  if (r.boolean()) {
    c.external_kem_ciphertext = r.bytes();
  }
  return c;
}

///
/// HandshakeMessage
///

static void
encode_sender(Writer& w, const Sender& sender)
{
  w.u8(static_cast<uint8_t>(sender.type));
  w.u32(sender.leaf);
}

static Sender
decode_sender(Reader& r)
{
  Sender s;
  const uint8_t type = r.u8();
  if (type != static_cast<uint8_t>(Sender::Type::member) &&
      type != static_cast<uint8_t>(Sender::Type::external)) {
    throw DecodeError("unknown sender type");
  }
  s.type = static_cast<Sender::Type>(type);
  s.leaf = r.u32();
  return s;
}

static void
encode_handshake_content(Writer& w, const std::variant<Proposal, Commit>& content)
{
  if (std::holds_alternative<Proposal>(content)) {
    w.u8(1);
    std::get<Proposal>(content).encode(w);
  } else {
    w.u8(2);
    std::get<Commit>(content).encode(w);
  }
}

Bytes
HandshakeMessage::content_tbs() const
{
  Writer w;
  w.str("HandshakeTBS");
  w.str(group_id);
  w.u64(epoch);
  encode_sender(w, sender);
  encode_handshake_content(w, content);
  return w.take();
}

Bytes
HandshakeMessage::to_be_signed() const
{
  Writer w;
  w.raw(content_tbs());
  w.boolean(confirmation_tag.has_value());
  if (confirmation_tag) {
    w.bytes(*confirmation_tag);
  }
  return w.take();
}

Bytes
HandshakeMessage::membership_data() const
{
  Writer w;
  w.raw(to_be_signed());
  w.bytes(signature);
  return w.take();
}

Bytes
HandshakeMessage::serialize() const
{
  Writer w;
  write_header(w, wire::handshake);
  w.str(group_id);
  w.u64(epoch);
  encode_sender(w, sender);
  encode_handshake_content(w, content);
  w.boolean(confirmation_tag.has_value());
  if (confirmation_tag) {
    w.bytes(*confirmation_tag);
  }
  w.bytes(signature);
  w.boolean(membership_tag.has_value());
  if (membership_tag) {
    w.bytes(*membership_tag);
  }
  return w.take();
}

HandshakeMessage
HandshakeMessage::deserialize(const Bytes& data)
{
  Reader r(data);
  check_header(r, wire::handshake);
  HandshakeMessage msg;
  msg.group_id = r.str();
  msg.epoch = r.u64();
  msg.sender = decode_sender(r);
  const uint8_t content_kind = r.u8();
  switch (content_kind) {
    case 1:
      msg.content = Proposal::decode(r);
      break;
    case 2:
      msg.content = Commit::decode(r);
      break;
    default:
      throw DecodeError("unknown handshake content kind");
  }
  if (r.boolean()) {
    msg.confirmation_tag = r.bytes();
  }
  msg.signature = r.bytes();
  if (r.boolean()) {
    msg.membership_tag = r.bytes();
  }
  r.expect_end();
  return msg;
}

///
/// ApplicationMessage
///

Bytes
ApplicationMessage::aad() const
{
  Writer w;
  w.str("ApplicationAAD");
  w.str(group_id);
  w.u64(epoch);
  w.u32(sender);
  w.u64(sequence);
  return w.take();
}

Bytes
ApplicationMessage::serialize() const
{
  Writer w;
  write_header(w, wire::application);
  w.str(group_id);
  w.u64(epoch);
  w.u32(sender);
  w.u64(sequence);
  w.bytes(ciphertext);
  return w.take();
}

ApplicationMessage
ApplicationMessage::deserialize(const Bytes& data)
{
  Reader r(data);
  check_header(r, wire::application);
  ApplicationMessage msg;
  msg.group_id = r.str();
  msg.epoch = r.u64();
  msg.sender = r.u32();
  msg.sequence = r.u64();
  msg.ciphertext = r.bytes();
  r.expect_end();
  return msg;
}

} // namespace cgkasim
