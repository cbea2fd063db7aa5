#include "cgkasim/group.hpp"

#include "cgkasim/errors.hpp"

#include <algorithm>
#include <set>

namespace cgkasim {

using namespace tree_math;

namespace wire {
constexpr uint8_t welcome = 3;
constexpr uint8_t group_info = 4;
} // namespace wire

namespace {

void
write_header(Writer& w, uint8_t type)
{
  w.u8(wire_format_version);
  w.u8(type);
}

void
check_header(Reader& r, uint8_t expected_type)
{
  if (r.u8() != wire_format_version) {
    throw DecodeError("unsupported wire format version");
  }
  if (r.u8() != expected_type) {
    throw DecodeError("unexpected message type");
  }
}

// AAD binding path-secret ciphertexts to the commit's group and epoch.
Bytes
path_secret_aad(const std::string& group_id, uint64_t epoch)
{
  Writer w;
  w.str("PathSecretAAD");
  w.str(group_id);
  w.u64(epoch);
  return w.take();
}

Bytes
welcome_aad(const GroupContext& context)
{
  Writer w;
  w.str("WelcomeAAD");
  context.encode(w);
  return w.take();
}

Secret
combine_secrets(const CryptoProvider& provider, const Secret& a, const Secret& b)
{
  Writer w;
  w.secret(a);
  w.secret(b);
  return Secret(provider.hash(w.out()));
}

LeafNode
make_leaf(const CryptoProvider& provider,
          const std::string& identity,
          const SignatureKeyPair& sig_keys,
          const Bytes& kem_public)
{
  LeafNode leaf;
  leaf.identity = identity;
  leaf.signature_public_key = sig_keys.public_key;
  leaf.kem_public_key = kem_public;
  leaf.credential = from_ascii("basic:" + identity);
  leaf.sign(provider, sig_keys.private_key);
  return leaf;
}

} // namespace

///
/// GroupContext
///

void
GroupContext::encode(Writer& w) const
{
  w.str(group_id);
  w.u64(epoch);
  w.bytes(tree_hash);
  w.bytes(confirmed_transcript_hash);
  w.boolean(external_joins_allowed);
}

GroupContext
GroupContext::decode(Reader& r)
{
  GroupContext ctx;
  ctx.group_id = r.str();
  ctx.epoch = r.u64();
  ctx.tree_hash = r.bytes();
  ctx.confirmed_transcript_hash = r.bytes();
  ctx.external_joins_allowed = r.boolean();
  return ctx;
}

Bytes
GroupContext::serialize() const
{
  Writer w;
  encode(w);
  return w.take();
}

///
/// Welcome
///

Bytes
Welcome::serialize() const
{
  Writer w;
  write_header(w, wire::welcome);
  context.encode(w);
  tree.encode(w);
  w.u32(committer_leaf);
  w.bytes(key_package_id);
  w.bytes(sealed_secrets.kem_ciphertext);
  w.bytes(sealed_secrets.ciphertext);
  w.bytes(confirmation_tag);
  return w.take();
}

Welcome
Welcome::deserialize(const Bytes& data)
{
  Reader r(data);
  check_header(r, wire::welcome);
  Welcome welcome;
  welcome.context = GroupContext::decode(r);
  welcome.tree = RatchetTree::decode(r);
  welcome.committer_leaf = r.u32();
  welcome.key_package_id = r.bytes();
  welcome.sealed_secrets.kem_ciphertext = r.bytes();
  welcome.sealed_secrets.ciphertext = r.bytes();
  welcome.confirmation_tag = r.bytes();
  r.expect_end();
  return welcome;
}

///
/// GroupInfo
///

Bytes
GroupInfo::to_be_signed() const
{
  Writer w;
  w.str("GroupInfoTBS");
  context.encode(w);
  tree.encode(w);
  w.bytes(external_public_key);
  w.u32(signer_leaf);
  return w.take();
}

Bytes
GroupInfo::serialize() const
{
  Writer w;
  write_header(w, wire::group_info);
  context.encode(w);
  tree.encode(w);
  w.bytes(external_public_key);
  w.u32(signer_leaf);
  w.bytes(signature);
  return w.take();
}

GroupInfo
GroupInfo::deserialize(const Bytes& data)
{
  Reader r(data);
  check_header(r, wire::group_info);
  GroupInfo gi;
  gi.context = GroupContext::decode(r);
  gi.tree = RatchetTree::decode(r);
  gi.external_public_key = r.bytes();
  gi.signer_leaf = r.u32();
  gi.signature = r.bytes();
  r.expect_end();
  return gi;
}

///
/// GroupState: creation and key schedule
///

GroupState
GroupState::create(std::shared_ptr<const CryptoProvider> provider,
                   RandomSource& rng,
                   const std::string& group_id,
                   const std::string& identity,
                   bool external_joins_allowed)
{
  GroupState state;
  state._provider = std::move(provider);
  state._group_id = group_id;
  state._external_joins_allowed = external_joins_allowed;

  const auto sig_keys = state._provider->sig_generate(rng);
  const auto leaf_keys = state._provider->kem_generate(rng);
  const LeafNode leaf = make_leaf(*state._provider, identity, sig_keys, leaf_keys.public_key);

  state._tree = RatchetTree::single(leaf);
  state._my_leaf = 0;
  state._signature_private = sig_keys.private_key;
  state._node_privates[node_index(LeafIndex(0))] = leaf_keys.private_key;

  state._confirmed_transcript_hash = Bytes{};
  state.install_epoch(rng.secret());
  return state;
}

GroupContext
GroupState::make_context(uint64_t epoch, const Bytes& tree_hash, const Bytes& transcript) const
{
  GroupContext ctx;
  ctx.group_id = _group_id;
  ctx.epoch = epoch;
  ctx.tree_hash = tree_hash;
  ctx.confirmed_transcript_hash = transcript;
  ctx.external_joins_allowed = _external_joins_allowed;
  return ctx;
}

GroupContext
GroupState::context() const
{
  return make_context(_epoch, _tree.tree_hash(*_provider), _confirmed_transcript_hash);
}

void
GroupState::install_epoch(const Secret& epoch_secret)
{
  _epoch_secret = epoch_secret;
  _init_secret = _provider->kdf(epoch_secret, "init", {});
  _confirmation_key = _provider->kdf(epoch_secret, "confirm", {});
  _membership_key = _provider->kdf(epoch_secret, "membership", {});
  _app_base = _provider->kdf(epoch_secret, "app", {});
  _external_keys = _provider->kem_derive(_provider->kdf(epoch_secret, "external", {}));
  _send_seq = 0;
  _update_privates.clear();
}

const std::string&
GroupState::identity() const
{
  const auto* leaf = _tree.leaf_node(_my_leaf);
  if (leaf == nullptr) {
    throw InvalidParameterError("own leaf is blank");
  }
  return leaf->identity;
}

Bytes
GroupState::epoch_authenticator() const
{
  return _provider->kdf(_epoch_secret, "authenticator", {}).to_bytes();
}

///
/// Proposals
///

HandshakeMessage
GroupState::frame_proposal(const Proposal& proposal) const
{
  HandshakeMessage msg;
  msg.group_id = _group_id;
  msg.epoch = _epoch;
  msg.sender = { Sender::Type::member, _my_leaf };
  msg.content = proposal;
  msg.signature = _provider->sign(_signature_private, msg.to_be_signed());
  msg.membership_tag = _provider->mac(_membership_key, msg.membership_data());
  return msg;
}

HandshakeMessage
GroupState::propose_add(const KeyPackage& key_package) const
{
  if (_evicted) {
    throw InvalidParameterError("evicted member cannot propose");
  }
  if (!key_package.valid(*_provider)) {
    throw InvalidProposal("key package signature is invalid");
  }
  if (_tree.find_identity(key_package.leaf_node.identity)) {
    throw InvalidProposal("identity is already a member");
  }
  return frame_proposal(Proposal{ AddProposal{ key_package } });
}

HandshakeMessage
GroupState::propose_remove(LeafIndex target) const
{
  if (_evicted) {
    throw InvalidParameterError("evicted member cannot propose");
  }
  if (target == _my_leaf) {
    throw InvalidProposal("self-removal is not allowed");
  }
  if (!_tree.leaf_occupied(target)) {
    throw InvalidProposal("removal target is not a member");
  }
  return frame_proposal(Proposal{ RemoveProposal{ target } });
}

HandshakeMessage
GroupState::propose_update(RandomSource& rng)
{
  if (_evicted) {
    throw InvalidParameterError("evicted member cannot propose");
  }
  const auto kem_keys = _provider->kem_generate(rng);
  const auto* current = _tree.leaf_node(_my_leaf);
  if (current == nullptr) {
    throw InvalidParameterError("own leaf is blank");
  }
  SignatureKeyPair sig_keys{ _signature_private, current->signature_public_key };
  const LeafNode leaf = make_leaf(*_provider, current->identity, sig_keys, kem_keys.public_key);
  const Proposal proposal{ UpdateProposal{ _my_leaf, leaf } };
  _update_privates[proposal.id(*_provider)] = kem_keys.private_key;
  return frame_proposal(proposal);
}

void
GroupState::validate_member_frame(const HandshakeMessage& message) const
{
  if (message.sender.type != Sender::Type::member) {
    throw BadSignature("expected a member sender");
  }
  const auto* leaf = _tree.leaf_node(message.sender.leaf);
  if (leaf == nullptr) {
    throw BadSignature("sender is not a member of this group");
  }
  if (!_provider->verify(leaf->signature_public_key, message.to_be_signed(), message.signature)) {
    throw BadSignature("handshake signature verification failed");
  }
  if (!message.membership_tag ||
      *message.membership_tag != _provider->mac(_membership_key, message.membership_data())) {
    throw BadSignature("membership tag verification failed");
  }
}

Proposal
GroupState::process_proposal(const HandshakeMessage& message) const
{
  if (_evicted) {
    throw InvalidParameterError("evicted member cannot process proposals");
  }
  if (message.group_id != _group_id) {
    throw NotForMe("proposal is for a different group");
  }
  if (message.epoch != _epoch) {
    throw WrongEpoch(_epoch, message.epoch, "proposal epoch does not match");
  }
  if (message.is_commit()) {
    throw InvalidParameterError("message is a commit, not a proposal");
  }
  validate_member_frame(message);

  const Proposal& proposal = message.proposal();
  if (const auto* remove = std::get_if<RemoveProposal>(&proposal.content)) {
    if (remove->removed == message.sender.leaf) {
      throw InvalidProposal("self-removal is not allowed");
    }
  }
  if (const auto* update = std::get_if<UpdateProposal>(&proposal.content)) {
    if (update->leaf != message.sender.leaf) {
      throw InvalidProposal("update proposal must target the sender's own leaf");
    }
  }
  return proposal;
}

GroupState::ApplyResult
GroupState::apply_proposals(const std::vector<Proposal>& proposals,
                            std::optional<LeafIndex> committer) const
{
  ApplyResult result;
  result.tree = _tree;

  std::set<LeafIndex> touched;
  const auto touch = [&touched](LeafIndex leaf) {
    if (!touched.insert(leaf).second) {
      throw InvalidProposal("multiple proposals touch the same leaf");
    }
  };

  // Updates first, then removes, then adds: a deterministic order shared by
  // committer and processors.
  for (const auto& p : proposals) {
    const auto* update = std::get_if<UpdateProposal>(&p.content);
    if (update == nullptr) {
      continue;
    }
    const auto* current = result.tree.leaf_node(update->leaf);
    if (current == nullptr) {
      throw InvalidProposal("update target is not a member");
    }
    if (current->identity != update->leaf_node.identity) {
      throw InvalidProposal("update may not change the leaf identity");
    }
    if (!update->leaf_node.valid(*_provider)) {
      throw InvalidProposal("updated leaf node signature is invalid");
    }
    touch(update->leaf);
    result.tree.update_leaf(update->leaf, update->leaf_node);
    result.updated[update->leaf] = p.id(*_provider);
  }

  for (const auto& p : proposals) {
    const auto* remove = std::get_if<RemoveProposal>(&p.content);
    if (remove == nullptr) {
      continue;
    }
    if (committer && remove->removed == *committer) {
      throw InvalidProposal("self-removal is not allowed");
    }
    if (!result.tree.leaf_occupied(remove->removed)) {
      throw InvalidProposal("removal target is not a member");
    }
    touch(remove->removed);
    result.tree.remove_leaf(remove->removed);
    result.removed.push_back(remove->removed);
  }

  for (const auto& p : proposals) {
    const auto* add = std::get_if<AddProposal>(&p.content);
    if (add == nullptr) {
      continue;
    }
    if (!add->key_package.valid(*_provider)) {
      throw InvalidProposal("added key package is invalid");
    }
    if (result.tree.find_identity(add->key_package.leaf_node.identity)) {
      throw InvalidProposal("identity is already a member");
    }
    const LeafIndex placed = result.tree.add_leaf(add->key_package.leaf_node);
    result.added.emplace_back(placed, add->key_package);
  }

  return result;
}

///
/// Commit creation
///

namespace {

// Private view of a freshly built update path.
struct PathSecrets
{
  Bytes leaf_private;
  std::vector<NodeIndex> filtered;
  std::vector<Secret> secrets;       // one per filtered node
  std::vector<Bytes> node_privates;  // one per filtered node
  Secret commit_secret;
};

// Rekey `committer`'s leaf and filtered direct path inside `tree`, returning
// both the public UpdatePath and the private chain.
std::pair<UpdatePath, PathSecrets>
build_update_path(const CryptoProvider& provider,
                  RandomSource& rng,
                  RatchetTree& tree,
                  LeafIndex committer,
                  const std::string& identity,
                  const SignatureKeyPair& sig_keys,
                  const std::string& group_id,
                  uint64_t epoch)
{
  const Secret leaf_secret = rng.secret();
  const KemKeyPair leaf_keys = provider.kem_derive(provider.kdf(leaf_secret, "node", {}));
  const LeafNode leaf = make_leaf(provider, identity, sig_keys, leaf_keys.public_key);

  if (tree.leaf_occupied(committer)) {
    tree.update_leaf(committer, leaf);
  } else {
    const LeafIndex placed = tree.add_leaf(leaf);
    if (placed != committer) {
      throw InvalidParameterError("committer leaf placement mismatch");
    }
  }

  PathSecrets secrets;
  secrets.leaf_private = leaf_keys.private_key;
  secrets.filtered = tree.filtered_direct_path(committer);

  UpdatePath path;
  path.leaf_node = leaf;

  const Bytes aad = path_secret_aad(group_id, epoch);
  Secret running = leaf_secret;
  NodeIndex below = node_index(committer);
  for (const auto node : secrets.filtered) {
    running = provider.kdf(running, "path", {});
    secrets.secrets.push_back(running);

    const KemKeyPair node_keys = provider.kem_derive(provider.kdf(running, "node", {}));
    secrets.node_privates.push_back(node_keys.private_key);
    tree.set_node_key(node, node_keys.public_key);

    UpdatePathNode path_node;
    path_node.public_key = node_keys.public_key;
    const NodeIndex left = left_child(node);
    const NodeIndex copath_child = is_ancestor(left, below) ? right_child(node) : left;
    for (const auto target : tree.resolution(copath_child)) {
      const Bytes* pk = tree.public_key(target);
      path_node.encrypted_path_secrets.push_back(
        provider.seal_to(*pk, rng, aad, running.to_bytes()));
    }
    path.nodes.push_back(path_node);
    below = node;
  }

  secrets.commit_secret = provider.kdf(running, "path", {});
  return { path, secrets };
}

// Retain previously held private keys only where the public key is unchanged
// between the two trees (same public bytes at the same node).
std::map<NodeIndex, Bytes>
retained_privates(const std::map<NodeIndex, Bytes>& old_privates,
                  const RatchetTree& old_tree,
                  const RatchetTree& new_tree)
{
  std::map<NodeIndex, Bytes> kept;
  for (const auto& [node, priv] : old_privates) {
    const Bytes* old_pk = old_tree.public_key(node);
    const Bytes* new_pk = new_tree.public_key(node);
    if (old_pk != nullptr && new_pk != nullptr && *old_pk == *new_pk) {
      kept[node] = priv;
    }
  }
  return kept;
}

} // namespace

PendingCommit
GroupState::create_commit(RandomSource& rng, const std::vector<Proposal>& proposals) const
{
  if (_evicted) {
    throw InvalidParameterError("evicted member cannot commit");
  }

  auto applied = apply_proposals(proposals, _my_leaf);

  const auto* my_old_leaf = _tree.leaf_node(_my_leaf);
  SignatureKeyPair sig_keys{ _signature_private, my_old_leaf->signature_public_key };
  auto [path, path_secrets] = build_update_path(*_provider,
                                                rng,
                                                applied.tree,
                                                _my_leaf,
                                                my_old_leaf->identity,
                                                sig_keys,
                                                _group_id,
                                                _epoch);

  Commit commit;
  commit.proposals = proposals;
  commit.path = path;

  HandshakeMessage msg;
  msg.group_id = _group_id;
  msg.epoch = _epoch;
  msg.sender = { Sender::Type::member, _my_leaf };
  msg.content = commit;

  // New epoch derivation.
  Writer tw;
  tw.raw(_confirmed_transcript_hash);
  tw.raw(msg.content_tbs());
  const Bytes transcript = _provider->hash(tw.out());
  const Bytes tree_hash = applied.tree.tree_hash(*_provider);
  const GroupContext new_context = make_context(_epoch + 1, tree_hash, transcript);
  const Secret combined = combine_secrets(*_provider, _init_secret, path_secrets.commit_secret);
  const Secret epoch_secret = _provider->kdf(combined, "epoch", new_context.serialize());

  auto next = std::make_shared<GroupState>(*this);
  next->_tree = applied.tree;
  next->_epoch = _epoch + 1;
  next->_confirmed_transcript_hash = transcript;
  next->install_epoch(epoch_secret);
  next->_node_privates = retained_privates(_node_privates, _tree, applied.tree);
  next->_node_privates[node_index(_my_leaf)] = path_secrets.leaf_private;
  for (size_t i = 0; i < path_secrets.filtered.size(); i++) {
    next->_node_privates[path_secrets.filtered[i]] = path_secrets.node_privates[i];
  }

  msg.confirmation_tag = _provider->mac(next->_confirmation_key, transcript);
  msg.signature = _provider->sign(_signature_private, msg.to_be_signed());
  msg.membership_tag = _provider->mac(_membership_key, msg.membership_data());

  PendingCommit pending;
  pending.next = next;
  pending.message = msg;
  pending.parent_transcript = _confirmed_transcript_hash;

  // One welcome per added member, carrying the path secret at the lowest
  // common ancestor of the committer and the new leaf.
  for (const auto& [added_leaf, kp] : applied.added) {
    size_t lca_pos = path_secrets.filtered.size();
    for (size_t i = 0; i < path_secrets.filtered.size(); i++) {
      if (is_ancestor(path_secrets.filtered[i], node_index(added_leaf))) {
        lca_pos = i;
        break;
      }
    }
    if (lca_pos == path_secrets.filtered.size()) {
      throw InvalidParameterError("added leaf has no common ancestor on the path");
    }

    Writer sw;
    sw.secret(path_secrets.secrets[lca_pos]);
    sw.secret(epoch_secret);

    Welcome welcome;
    welcome.context = new_context;
    welcome.tree = applied.tree;
    welcome.committer_leaf = _my_leaf;
    welcome.key_package_id = kp.id(*_provider);
    welcome.sealed_secrets =
      _provider->seal_to(kp.init_public_key, rng, welcome_aad(new_context), sw.out());
    welcome.confirmation_tag = *msg.confirmation_tag;
    pending.welcomes.push_back(std::move(welcome));
  }

  pending.group_info = std::make_shared<GroupInfo>(next->export_group_info());
  return pending;
}

GroupState
GroupState::merge_pending(const PendingCommit& pending) const
{
  if (_evicted) {
    throw InvalidParameterError("evicted member cannot advance");
  }
  if (!pending.next || pending.next->_group_id != _group_id ||
      pending.next->_epoch != _epoch + 1 ||
      pending.parent_transcript != _confirmed_transcript_hash) {
    throw PendingMismatch("pending commit does not extend the current state");
  }
  return *pending.next;
}

///
/// Commit processing
///

GroupState
GroupState::process_commit(const HandshakeMessage& message) const
{
  if (_evicted) {
    throw InvalidParameterError("evicted member cannot process commits");
  }
  if (message.group_id != _group_id) {
    throw NotForMe("commit is for a different group");
  }
  if (!message.is_commit()) {
    throw InvalidParameterError("message is not a commit");
  }
  if (message.epoch != _epoch) {
    throw WrongEpoch(_epoch, message.epoch, "commit epoch does not match");
  }
  const Commit& commit = message.commit();
  const bool external = message.sender.type == Sender::Type::external;

  if (!commit.path.leaf_node.valid(*_provider)) {
    throw BadSignature("update path leaf node signature is invalid");
  }

  ApplyResult applied;
  LeafIndex committer = message.sender.leaf;

  if (external) {
    if (!_external_joins_allowed) {
      throw ExternalJoinsDisabled("group does not accept external commits");
    }
    if (!commit.proposals.empty()) {
      throw InvalidProposal("external commits cannot carry proposals");
    }
    if (!commit.external_kem_ciphertext) {
      throw InvalidProposal("external commit is missing its KEM ciphertext");
    }
    if (message.membership_tag) {
      throw BadSignature("external commit must not carry a membership tag");
    }
    if (!_provider->verify(commit.path.leaf_node.signature_public_key,
                           message.to_be_signed(),
                           message.signature)) {
      throw BadSignature("external commit signature verification failed");
    }
    if (_tree.find_identity(commit.path.leaf_node.identity)) {
      throw InvalidProposal("identity is already a member");
    }
    applied.tree = _tree;
    const LeafIndex placed = applied.tree.add_leaf(commit.path.leaf_node);
    if (placed != committer) {
      throw BadTree("external commit claims the wrong leaf position");
    }
  } else {
    if (committer == _my_leaf) {
      throw InvalidParameterError("own commit must be applied via merge_pending");
    }
    if (commit.external_kem_ciphertext) {
      throw InvalidProposal("member commit carries an external KEM ciphertext");
    }
    validate_member_frame(message);
    const auto* committer_leaf_node = _tree.leaf_node(committer);
    if (committer_leaf_node->identity != commit.path.leaf_node.identity) {
      throw InvalidProposal("update path may not change the committer identity");
    }
    applied = apply_proposals(commit.proposals, committer);
  }

  // Was this member removed?
  const auto* my_leaf_after = applied.tree.leaf_node(_my_leaf);
  const bool removed =
    my_leaf_after == nullptr ||
    (!external && std::find(applied.removed.begin(), applied.removed.end(), _my_leaf) !=
                    applied.removed.end());
  if (removed) {
    GroupState evicted = *this;
    evicted._evicted = true;
    return evicted;
  }

  const auto filtered = applied.tree.install_update_path(committer, commit.path);

  // Locate the lowest path node covering this member and decrypt there.
  size_t entry_pos = filtered.size();
  for (size_t i = 0; i < filtered.size(); i++) {
    if (is_ancestor(filtered[i], node_index(_my_leaf))) {
      entry_pos = i;
      break;
    }
  }
  if (entry_pos == filtered.size()) {
    throw UnableToDecrypt("no path node covers this member");
  }
  const NodeIndex entry = filtered[entry_pos];
  const NodeIndex left = left_child(entry);
  const NodeIndex my_side =
    is_ancestor(left, node_index(_my_leaf)) ? left : right_child(entry);
  const auto res = applied.tree.resolution(my_side);
  if (res.size() != commit.path.nodes[entry_pos].encrypted_path_secrets.size()) {
    throw BadTree("ciphertext count does not match the resolution");
  }

  // Which resolved node do we hold a key for? Exactly one covers our leaf.
  std::map<NodeIndex, Bytes> privates = _node_privates;
  if (const auto it = applied.updated.find(_my_leaf); it != applied.updated.end()) {
    // Our own update proposal was committed: switch to the key generated then.
    const auto stash = _update_privates.find(it->second);
    if (stash == _update_privates.end()) {
      throw UnableToDecrypt("no private key for own updated leaf");
    }
    privates[node_index(_my_leaf)] = stash->second;
  }

  size_t res_pos = res.size();
  for (size_t i = 0; i < res.size(); i++) {
    if (is_ancestor(res[i], node_index(_my_leaf)) && privates.count(res[i]) > 0) {
      res_pos = i;
      break;
    }
  }
  if (res_pos == res.size()) {
    throw UnableToDecrypt("no held key can open the path secret");
  }

  Secret running;
  try {
    const Bytes plain =
      _provider->open_from(privates.at(res[res_pos]),
                           commit.path.nodes[entry_pos].encrypted_path_secrets[res_pos],
                           path_secret_aad(_group_id, _epoch));
    running = Secret(plain);
  } catch (const DecapError&) {
    throw UnableToDecrypt("path secret decapsulation failed");
  } catch (const AeadError&) {
    throw UnableToDecrypt("path secret decryption failed");
  }

  // Walk up the path, deriving and checking each node key pair.
  std::map<NodeIndex, Bytes> derived;
  Secret secret_at = running;
  for (size_t i = entry_pos; i < filtered.size(); i++) {
    if (i > entry_pos) {
      secret_at = _provider->kdf(secret_at, "path", {});
    }
    const KemKeyPair keys = _provider->kem_derive(_provider->kdf(secret_at, "node", {}));
    if (keys.public_key != commit.path.nodes[i].public_key) {
      throw BadTree("derived path key does not match the update path");
    }
    derived[filtered[i]] = keys.private_key;
  }
  const Secret commit_secret = _provider->kdf(secret_at, "path", {});

  // New epoch derivation, mirroring the committer.
  Writer tw;
  tw.raw(_confirmed_transcript_hash);
  tw.raw(message.content_tbs());
  const Bytes transcript = _provider->hash(tw.out());
  const Bytes tree_hash = applied.tree.tree_hash(*_provider);
  const GroupContext new_context = make_context(_epoch + 1, tree_hash, transcript);

  Secret pre;
  if (external) {
    try {
      const Secret shared =
        _provider->kem_decap(_external_keys.private_key, *commit.external_kem_ciphertext);
      pre = _provider->kdf(shared, "ext-init", {});
    } catch (const DecapError&) {
      throw UnableToDecrypt("external init decapsulation failed");
    }
  } else {
    pre = _init_secret;
  }
  const Secret combined = combine_secrets(*_provider, pre, commit_secret);
  const Secret epoch_secret = _provider->kdf(combined, "epoch", new_context.serialize());

  GroupState next = *this;
  next._tree = applied.tree;
  next._epoch = _epoch + 1;
  next._confirmed_transcript_hash = transcript;

  const Secret confirmation_key = _provider->kdf(epoch_secret, "confirm", {});
  if (!message.confirmation_tag ||
      *message.confirmation_tag != _provider->mac(confirmation_key, transcript)) {
    throw BadConfirmationTag("confirmation tag verification failed");
  }

  next.install_epoch(epoch_secret);
  next._node_privates = retained_privates(privates, _tree, applied.tree);
  if (const auto it = applied.updated.find(_my_leaf); it != applied.updated.end()) {
    next._node_privates[node_index(_my_leaf)] = privates.at(node_index(_my_leaf));
  }
  for (const auto& [node, priv] : derived) {
    next._node_privates[node] = priv;
  }
  return next;
}

///
/// Welcome processing
///

GroupState
GroupState::process_welcome(std::shared_ptr<const CryptoProvider> provider,
                            const Welcome& welcome,
                            const KeyPackagePrivate& kp_private)
{
  if (welcome.key_package_id != kp_private.key_package.id(*provider)) {
    throw NotForMe("welcome addresses a different key package");
  }

  welcome.tree.validate(*provider);
  if (welcome.context.tree_hash != welcome.tree.tree_hash(*provider)) {
    throw BadTree("tree hash does not match the context");
  }
  const auto my_leaf = welcome.tree.find(kp_private.key_package.leaf_node);
  if (!my_leaf) {
    throw BadTree("joiner leaf is not in the tree");
  }
  if (!welcome.tree.leaf_occupied(welcome.committer_leaf)) {
    throw BadTree("committer leaf is blank");
  }

  Bytes plain;
  try {
    plain = provider->open_from(
      kp_private.init_private_key, welcome.sealed_secrets, welcome_aad(welcome.context));
  } catch (const DecapError&) {
    throw UnableToDecrypt("welcome secrets decapsulation failed");
  } catch (const AeadError&) {
    throw UnableToDecrypt("welcome secrets decryption failed");
  }
  Reader r(plain);
  const Secret path_secret = r.secret();
  const Secret epoch_secret = r.secret();
  r.expect_end();

  GroupState state;
  state._provider = std::move(provider);
  state._group_id = welcome.context.group_id;
  state._external_joins_allowed = welcome.context.external_joins_allowed;
  state._epoch = welcome.context.epoch;
  state._tree = welcome.tree;
  state._my_leaf = *my_leaf;
  state._signature_private = kp_private.signature_private_key;
  state._confirmed_transcript_hash = welcome.context.confirmed_transcript_hash;
  state._node_privates[node_index(*my_leaf)] = kp_private.leaf_kem_private_key;

  // Derive the committer-path keys from the shared path secret upward.
  const auto filtered = state._tree.filtered_direct_path(welcome.committer_leaf);
  size_t lca_pos = filtered.size();
  for (size_t i = 0; i < filtered.size(); i++) {
    if (is_ancestor(filtered[i], node_index(*my_leaf))) {
      lca_pos = i;
      break;
    }
  }
  if (lca_pos == filtered.size()) {
    throw BadTree("no common ancestor with the committer");
  }
  Secret secret_at = path_secret;
  for (size_t i = lca_pos; i < filtered.size(); i++) {
    if (i > lca_pos) {
      secret_at = state._provider->kdf(secret_at, "path", {});
    }
    const KemKeyPair keys =
      state._provider->kem_derive(state._provider->kdf(secret_at, "node", {}));
    const Bytes* pk = state._tree.public_key(filtered[i]);
    if (pk == nullptr || keys.public_key != *pk) {
      throw BadTree("derived path key does not match the tree");
    }
    state._node_privates[filtered[i]] = keys.private_key;
  }

  state.install_epoch(epoch_secret);
  if (welcome.confirmation_tag !=
      state._provider->mac(state._confirmation_key,
                           welcome.context.confirmed_transcript_hash)) {
    throw BadConfirmationTag("welcome confirmation tag verification failed");
  }
  return state;
}

///
/// External commits
///

ExternalJoin
GroupState::external_commit(std::shared_ptr<const CryptoProvider> provider,
                            RandomSource& rng,
                            const GroupInfo& group_info,
                            const std::string& identity)
{
  try {
    group_info.tree.validate(*provider);
  } catch (const BadTree&) {
    throw BadGroupInfo("group info tree is invalid");
  }
  if (group_info.context.tree_hash != group_info.tree.tree_hash(*provider)) {
    throw BadGroupInfo("group info tree hash does not match");
  }
  const auto* signer = group_info.tree.leaf_node(group_info.signer_leaf);
  if (signer == nullptr) {
    throw BadGroupInfo("group info signer is not a member");
  }
  if (!provider->verify(
        signer->signature_public_key, group_info.to_be_signed(), group_info.signature)) {
    throw BadGroupInfo("group info signature verification failed");
  }
  if (!group_info.context.external_joins_allowed) {
    throw ExternalJoinsDisabled("group does not accept external commits");
  }
  if (group_info.tree.find_identity(identity)) {
    throw InvalidProposal("identity is already a member");
  }

  GroupState state;
  state._provider = provider;
  state._group_id = group_info.context.group_id;
  state._external_joins_allowed = group_info.context.external_joins_allowed;

  const auto sig_keys = provider->sig_generate(rng);
  state._signature_private = sig_keys.private_key;

  RatchetTree tree = group_info.tree;
  // Claim the slot the join rules assign: leftmost blank, or the first new
  // slot after doubling when the tree is full.
  const LeafIndex claimed = tree.leftmost_blank().value_or(tree.capacity());

  auto [path, path_secrets] = build_update_path(*provider,
                                                rng,
                                                tree,
                                                claimed,
                                                identity,
                                                sig_keys,
                                                group_info.context.group_id,
                                                group_info.context.epoch);

  const KemOutput ext = provider->kem_encap(group_info.external_public_key, rng);

  Commit commit;
  commit.path = path;
  commit.external_kem_ciphertext = ext.ciphertext;

  HandshakeMessage msg;
  msg.group_id = group_info.context.group_id;
  msg.epoch = group_info.context.epoch;
  msg.sender = { Sender::Type::external, claimed };
  msg.content = commit;

  Writer tw;
  tw.raw(group_info.context.confirmed_transcript_hash);
  tw.raw(msg.content_tbs());
  const Bytes transcript = provider->hash(tw.out());
  const Bytes tree_hash = tree.tree_hash(*provider);

  state._tree = tree;
  state._my_leaf = claimed;
  state._epoch = group_info.context.epoch + 1;
  state._confirmed_transcript_hash = transcript;

  const GroupContext new_context =
    state.make_context(state._epoch, tree_hash, transcript);
  const Secret pre = provider->kdf(ext.shared, "ext-init", {});
  const Secret combined = combine_secrets(*provider, pre, path_secrets.commit_secret);
  const Secret epoch_secret = provider->kdf(combined, "epoch", new_context.serialize());

  state.install_epoch(epoch_secret);
  state._node_privates[node_index(claimed)] = path_secrets.leaf_private;
  for (size_t i = 0; i < path_secrets.filtered.size(); i++) {
    state._node_privates[path_secrets.filtered[i]] = path_secrets.node_privates[i];
  }

  msg.confirmation_tag = provider->mac(state._confirmation_key, transcript);
  msg.signature = provider->sign(sig_keys.private_key, msg.to_be_signed());

  ExternalJoin join;
  join.state = std::make_shared<GroupState>(std::move(state));
  join.message = msg;
  join.group_info = std::make_shared<GroupInfo>(join.state->export_group_info());
  return join;
}

///
/// Group info export
///

GroupInfo
GroupState::export_group_info() const
{
  if (_evicted) {
    throw InvalidParameterError("evicted member cannot export group info");
  }
  GroupInfo gi;
  gi.context = context();
  gi.tree = _tree;
  gi.external_public_key = _external_keys.public_key;
  gi.signer_leaf = _my_leaf;
  gi.signature = _provider->sign(_signature_private, gi.to_be_signed());
  return gi;
}

///
/// Application traffic
///

ApplicationMessage
GroupState::seal_application(const Bytes& plaintext)
{
  if (_evicted) {
    throw InvalidParameterError("evicted member cannot send messages");
  }
  Writer kw;
  kw.u32(_my_leaf);
  const Secret key = _provider->kdf(_app_base, "app-key", kw.out());

  ApplicationMessage msg;
  msg.group_id = _group_id;
  msg.epoch = _epoch;
  msg.sender = _my_leaf;
  msg.sequence = _send_seq++;

  Bytes nonce(CryptoProvider::aead_nonce_size, 0);
  uint64_t seq = msg.sequence;
  for (size_t i = 0; i < 8; i++) {
    nonce[nonce.size() - 1 - i] = static_cast<uint8_t>(seq & 0xff);
    seq >>= 8;
  }
  msg.ciphertext = _provider->aead_seal(key, nonce, msg.aad(), plaintext);
  return msg;
}

Bytes
GroupState::open_application(const ApplicationMessage& message) const
{
  if (_evicted) {
    throw OpenError("removed member cannot read group messages");
  }
  if (message.group_id != _group_id) {
    throw OpenError("message is for a different group");
  }
  if (message.epoch != _epoch) {
    throw WrongEpoch(_epoch, message.epoch, "message epoch does not match");
  }
  if (!_tree.leaf_occupied(message.sender)) {
    throw OpenError("message sender is not a member");
  }

  Writer kw;
  kw.u32(message.sender);
  const Secret key = _provider->kdf(_app_base, "app-key", kw.out());

  Bytes nonce(CryptoProvider::aead_nonce_size, 0);
  uint64_t seq = message.sequence;
  for (size_t i = 0; i < 8; i++) {
    nonce[nonce.size() - 1 - i] = static_cast<uint8_t>(seq & 0xff);
    seq >>= 8;
  }
  try {
    return _provider->aead_open(key, nonce, message.aad(), message.ciphertext);
  } catch (const AeadError&) {
    throw OpenError("message authentication failed");
  }
}

} // namespace cgkasim
