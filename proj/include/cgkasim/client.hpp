#pragma once

#include <cgkasim/clock.hpp>
#include <cgkasim/config.hpp>
#include <cgkasim/delivery.hpp>
#include <cgkasim/group.hpp>
#include <cgkasim/logrec.hpp>
#include <cgkasim/random.hpp>

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cgkasim {

///
/// Autonomous simulated clients. Each client owns its group states, reacts
/// to deliveries, and wakes periodically to send messages, modify groups,
/// and join groups it is configured for, per its ClientConfig.
///

// Where logged operation costs come from: measured thread CPU time for
// realistic cost series, or a constant zero so that repeated runs of the
// same seed produce byte-identical logs.
enum struct CostSource : uint8_t
{
  cpu = 0,
  zero = 1,
};

CostSource cost_source_from_name(const std::string& name);
const std::string& cost_source_name(CostSource source);

// reads the executing thread's CPU clock; returns 0 under CostSource::zero
uint64_t cost_clock_us(CostSource source);

struct ClientStats
{
  uint64_t commits_won = 0;
  uint64_t lost_races = 0;
  // the epoch's winning commit could not be applied to this member's state:
  // the group forked around it (confirmation windows are no consensus)
  uint64_t desyncs = 0;
  uint64_t stale_commits_dropped = 0;
  uint64_t stale_proposals_dropped = 0;
  uint64_t conflicting_proposals = 0;
  uint64_t stale_app_dropped = 0;
  uint64_t app_open_failures = 0;
  uint64_t malformed_payloads = 0;
  uint64_t orphan_welcomes = 0;
  uint64_t failed_joins = 0;
  uint64_t skipped_modifications = 0;
};

class SimClient
{
public:
  SimClient(std::string user_id,
            ClientConfig config,
            std::shared_ptr<const CryptoProvider> provider,
            std::shared_ptr<DeliveryService> delivery,
            Scheduler& scheduler,
            LogSink& sink,
            uint64_t seed,
            CostSource cost_source);

  SimClient(const SimClient&) = delete;
  SimClient& operator=(const SimClient&) = delete;

  // Connect, subscribe the personal welcome topic, claim configured groups
  // (claim winners create them and become their first member), publish a
  // key package otherwise, and schedule the first wake.
  void start(VirtualTime activation_delay);

  const std::string& user_id() const { return _user; }
  const ClientStats& stats() const { return _stats; }

  // null unless this client is currently a member
  const GroupState* group_state(const std::string& group_id) const;
  bool is_creator(const std::string& group_id) const;
  uint32_t largest_group() const;

private:
  // Bookkeeping for a commit (or external join) whose delivery outcome is
  // not yet decided; logged only if the commit wins its epoch.
  struct CommitMeta
  {
    Action action = Action::update;
    std::string counterpart = "-";
    uint64_t size_bytes = 0;
    VirtualTime generated_at = 0;
    uint64_t cost_us = 0;
    uint64_t pre_size = 1; // members before the commit applies
    std::vector<std::pair<std::string, Welcome>> welcomes; // target -> welcome
  };

  // Commit candidates for the current epoch while the confirmation window
  // of a winner-by-id delivery service is open.
  struct Race
  {
    uint64_t epoch = 0;
    std::vector<Envelope> candidates;
  };

  struct GroupSlot
  {
    std::string group_id;
    std::optional<GroupState> state;
    std::optional<PendingCommit> pending;
    std::optional<CommitMeta> pending_meta;
    std::optional<ExternalJoin> ext_pending;
    std::optional<CommitMeta> ext_meta;
    std::optional<Race> race;
    std::vector<Proposal> proposal_buffer; // validated, current epoch
    std::set<Bytes> buffered_ids;
    bool last_buffered_is_own = false;
    std::vector<Envelope> future; // buffered future-epoch envelopes
    bool creator = false;
    bool newest = false;
    bool subscribed = false;
  };

  /// Wake loop

  void schedule_wake(VirtualTime delay);
  void wake();
  void act_on_group(GroupSlot& slot);
  void try_send_message(GroupSlot& slot);
  void try_modification(GroupSlot& slot);
  void try_join(GroupSlot& slot);
  bool policy_allows(const GroupSlot& slot) const;
  bool conflicts_with_buffer(const GroupSlot& slot, const Proposal& proposal) const;

  /// Modification paths

  void modify_invite(GroupSlot& slot);
  void modify_remove(GroupSlot& slot);
  void modify_update(GroupSlot& slot);
  void commit_single(GroupSlot& slot, std::vector<Proposal> proposals, CommitMeta meta);
  void maybe_commit_batch(GroupSlot& slot);
  CommitMeta meta_for_batch(const GroupSlot& slot, const std::vector<Proposal>& batch) const;

  /// Delivery handling

  void on_deliver(const Envelope& envelope);
  void handle_welcome(const Envelope& envelope);
  void handle_handshake(GroupSlot& slot, const Envelope& envelope);
  void handle_proposal(GroupSlot& slot, const Envelope& envelope, const HandshakeMessage& message);
  void handle_commit(GroupSlot& slot, const Envelope& envelope, const HandshakeMessage& message);
  void handle_application(GroupSlot& slot, const Envelope& envelope);
  void add_candidate(GroupSlot& slot, const Envelope& envelope);
  void decide_race(const std::string& group_id);
  void resolve_commit(GroupSlot& slot, const Envelope& envelope);
  void resolve_member_commit(GroupSlot& slot, const HandshakeMessage& message);
  void resolve_external_race(GroupSlot& slot, const Envelope& envelope);
  void adopt_own_commit(GroupSlot& slot);
  void leave_group(GroupSlot& slot);
  void after_epoch_advance(GroupSlot& slot, bool added_others);
  void replay_future(GroupSlot& slot);

  /// Helpers

  void publish(const std::string& topic, const Bytes& payload);
  void publish_group_info(GroupSlot& slot);
  void ensure_key_package();
  std::string committer_identity(const GroupState& pre_state, const HandshakeMessage& message) const;
  std::set<std::string> member_identities(const GroupState& state) const;
  void log_record(const GroupSlot& slot, Action action, const std::string& counterpart,
                  std::optional<uint64_t> size_bytes, VirtualTime timestamp,
                  uint64_t cost_us, uint64_t group_size);
  uint64_t sleep_draw_ns();

  std::string _user;
  ClientConfig _config;
  std::shared_ptr<const CryptoProvider> _provider;
  std::shared_ptr<DeliveryService> _delivery;
  Scheduler& _scheduler;
  LogSink& _sink;
  DeterministicRandom _rng;
  CostSource _cost_source;

  SessionId _session = 0;
  bool _started = false;
  std::map<std::string, GroupSlot> _slots;
  std::map<Bytes, KeyPackagePrivate> _key_packages; // by key package id
  ClientStats _stats;
};

} // namespace cgkasim
