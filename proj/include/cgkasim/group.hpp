#pragma once

#include "cgkasim/ratchet_tree.hpp"

#include <map>
#include <memory>

namespace cgkasim {

struct GroupContext
{
  std::string group_id;
  uint64_t epoch = 0;
  Bytes tree_hash;
  Bytes confirmed_transcript_hash;
  bool external_joins_allowed = false;

  void encode(Writer& w) const;
  static GroupContext decode(Reader& r);
  Bytes serialize() const;

  friend bool operator==(const GroupContext&, const GroupContext&) = default;
};

// Everything one added member needs to enter the group at the new epoch.
struct Welcome
{
  GroupContext context;
  RatchetTree tree;
  LeafIndex committer_leaf = 0;
  Bytes key_package_id;
  // Sealed to the joiner's init key: the path secret shared with the
  // committer plus the new epoch secret.
  HpkeCiphertext sealed_secrets;
  Bytes confirmation_tag;

  Bytes serialize() const;
  static Welcome deserialize(const Bytes& data);

  friend bool operator==(const Welcome&, const Welcome&) = default;
};

// Public snapshot that lets an outsider join without an invitation.
struct GroupInfo
{
  GroupContext context;
  RatchetTree tree;
  Bytes external_public_key;
  LeafIndex signer_leaf = 0;
  Bytes signature;

  Bytes to_be_signed() const;

  Bytes serialize() const;
  static GroupInfo deserialize(const Bytes& data);

  friend bool operator==(const GroupInfo&, const GroupInfo&) = default;
};

class GroupState;

// A commit the local member has created but whose delivery outcome is not
// yet known. Applied via merge_pending once the delivery service confirms
// this commit won its epoch; discarded if another commit won instead.
struct PendingCommit
{
  std::shared_ptr<GroupState> next;
  HandshakeMessage message;
  std::vector<Welcome> welcomes;
  std::shared_ptr<GroupInfo> group_info;
  // Transcript this commit was built on; merge_pending uses it to reject
  // pendings that do not belong to the current state.
  Bytes parent_transcript;
};

// Result of joining a group from the outside via its published GroupInfo.
struct ExternalJoin
{
  std::shared_ptr<GroupState> state;
  HandshakeMessage message;
  std::shared_ptr<GroupInfo> group_info;
};

class GroupState
{
public:
  // Create a new one-member group with the caller as creator.
  static GroupState create(std::shared_ptr<const CryptoProvider> provider,
                           RandomSource& rng,
                           const std::string& group_id,
                           const std::string& identity,
                           bool external_joins_allowed);

  // Enter an existing group via a Welcome addressed to this key package.
  static GroupState process_welcome(std::shared_ptr<const CryptoProvider> provider,
                                    const Welcome& welcome,
                                    const KeyPackagePrivate& kp_private);

  // Join an existing group from outside via its published GroupInfo.
  static ExternalJoin external_commit(std::shared_ptr<const CryptoProvider> provider,
                                      RandomSource& rng,
                                      const GroupInfo& group_info,
                                      const std::string& identity);

  /// Proposals

  HandshakeMessage propose_add(const KeyPackage& key_package) const;
  HandshakeMessage propose_remove(LeafIndex target) const;
  // Generates a fresh leaf KEM key; the private half is remembered so a later
  // commit applying this proposal can be processed.
  HandshakeMessage propose_update(RandomSource& rng);

  // Re-frame and validate a proposal received from the delivery service.
  // Throws WrongEpoch / BadSignature / InvalidProposal.
  Proposal process_proposal(const HandshakeMessage& message) const;

  /// Commits

  // Build a commit applying the given proposals plus a fresh update path.
  // The caller's state is unchanged; the result carries the advanced state.
  PendingCommit create_commit(RandomSource& rng, const std::vector<Proposal>& proposals) const;

  // Apply a commit received from the delivery service. If the commit removes
  // this member, the returned state is marked evicted and cannot advance.
  GroupState process_commit(const HandshakeMessage& message) const;

  // Adopt the state of a previously created commit after the delivery
  // service confirmed it won its epoch.
  GroupState merge_pending(const PendingCommit& pending) const;

  /// Group info

  GroupInfo export_group_info() const;

  /// Application traffic

  ApplicationMessage seal_application(const Bytes& plaintext);
  Bytes open_application(const ApplicationMessage& message) const;

  /// Inspection

  const std::string& group_id() const { return _group_id; }
  uint64_t epoch() const { return _epoch; }
  const RatchetTree& tree() const { return _tree; }
  LeafIndex my_leaf() const { return _my_leaf; }
  const std::string& identity() const;
  bool evicted() const { return _evicted; }
  uint32_t member_count() const { return _tree.occupied(); }
  bool external_joins_allowed() const { return _external_joins_allowed; }
  GroupContext context() const;

  // Epoch-bound value equal across members iff they share the epoch secret;
  // lets tests and clients check agreement without exposing the secret.
  Bytes epoch_authenticator() const;

  // Private keys currently held, by node index (test/diagnostic use).
  const std::map<NodeIndex, Bytes>& node_private_keys() const { return _node_privates; }

private:
  GroupState() = default;

  GroupContext make_context(uint64_t epoch, const Bytes& tree_hash, const Bytes& transcript) const;
  void install_epoch(const Secret& epoch_secret);
  HandshakeMessage frame_proposal(const Proposal& proposal) const;
  void validate_member_frame(const HandshakeMessage& message) const;

  struct ApplyResult
  {
    RatchetTree tree;
    std::vector<std::pair<LeafIndex, KeyPackage>> added;
    std::vector<LeafIndex> removed;
    // Leaf index -> proposal id, for updates (to recover stashed privates).
    std::map<LeafIndex, Bytes> updated;
  };

  // Validate proposals against the current tree and apply them to a copy.
  // committer is nullopt for external commits (which carry no proposals).
  ApplyResult apply_proposals(const std::vector<Proposal>& proposals,
                              std::optional<LeafIndex> committer) const;

  std::shared_ptr<const CryptoProvider> _provider;
  std::string _group_id;
  uint64_t _epoch = 0;
  bool _external_joins_allowed = false;
  bool _evicted = false;

  RatchetTree _tree;
  LeafIndex _my_leaf = 0;
  Bytes _signature_private;

  Bytes _confirmed_transcript_hash;
  Secret _epoch_secret;
  Secret _init_secret;
  Secret _confirmation_key;
  Secret _membership_key;
  Secret _app_base;
  KemKeyPair _external_keys;

  std::map<NodeIndex, Bytes> _node_privates;
  // Proposal id -> leaf KEM private generated by propose_update.
  std::map<Bytes, Bytes> _update_privates;

  uint64_t _send_seq = 0;
};

} // namespace cgkasim
