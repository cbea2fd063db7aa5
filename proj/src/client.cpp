#include <cgkasim/client.hpp>

#include <algorithm>
#include <ctime>

namespace cgkasim {

///
/// Cost source
///

static const std::string cost_source_names[] = { "cpu", "zero" };

const std::string&
cost_source_name(CostSource source)
{
  return cost_source_names[static_cast<size_t>(source)];
}

CostSource
cost_source_from_name(const std::string& name)
{
  for (size_t i = 0; i < 2; i++) {
    if (name == cost_source_names[i]) {
      return static_cast<CostSource>(i);
    }
  }
  throw BadValue("unknown cost source: " + name);
}

uint64_t
cost_clock_us(CostSource source)
{
  if (source == CostSource::zero) {
    return 0;
  }
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<uint64_t>(ts.tv_sec) * 1000000 +
         static_cast<uint64_t>(ts.tv_nsec) / 1000;
}

///
/// Construction and startup
///

SimClient::SimClient(std::string user_id,
                     ClientConfig config,
                     std::shared_ptr<const CryptoProvider> provider,
                     std::shared_ptr<DeliveryService> delivery,
                     Scheduler& scheduler,
                     LogSink& sink,
                     uint64_t seed,
                     CostSource cost_source)
  : _user(std::move(user_id))
  , _config(std::move(config))
  , _provider(std::move(provider))
  , _delivery(std::move(delivery))
  , _scheduler(scheduler)
  , _sink(sink)
  , _rng(seed)
  , _cost_source(cost_source)
{
  _config.validate();
}

void
SimClient::start(VirtualTime activation_delay)
{
  if (_started) {
    throw InvalidParameterError("client already started");
  }
  _started = true;

  _session = _delivery->connect(_user, [this](const Envelope& env) { on_deliver(env); });
  _delivery->register_user(_user);
  _delivery->subscribe(_session, welcome_topic(_user));

  bool needs_key_package = false;
  for (const auto& group_id : _config.groups) {
    auto& slot = _slots[group_id];
    slot.group_id = group_id;
    if (_delivery->claim_group(group_id, _user)) {
      slot.creator = true;
      slot.newest = true;
      auto begin = cost_clock_us(_cost_source);
      slot.state = GroupState::create(
        _provider, _rng, group_id, _user, _config.external_join);
      auto cost = cost_clock_us(_cost_source) - begin;
      _delivery->subscribe(_session, group_topic(group_id));
      slot.subscribed = true;
      publish_group_info(slot);
      // creation itself is not a log action; fold its cost into the first
      // group info record implicitly by leaving it unlogged here
      (void)cost;
    } else {
      needs_key_package = true;
    }
  }
  if (needs_key_package) {
    ensure_key_package();
  }

  schedule_wake(activation_delay + sleep_draw_ns());
}

///
/// Wake loop
///

uint64_t
SimClient::sleep_draw_ns()
{
  return ms_to_ns(
    _rng.uniform_u64(_config.sleep_millis_min, _config.sleep_millis_max));
}

void
SimClient::schedule_wake(VirtualTime delay)
{
  _scheduler.schedule_after(delay, [this] { wake(); });
}

void
SimClient::wake()
{
  for (const auto& group_id : _config.groups) {
    act_on_group(_slots.at(group_id));
  }
  schedule_wake(sleep_draw_ns());
}

void
SimClient::act_on_group(GroupSlot& slot)
{
  if (slot.state && !slot.state->evicted()) {
    if (_rng.chance(_config.message_chance)) {
      try_send_message(slot);
    }
    if (_rng.chance(_config.issue_update_chance)) {
      try_modification(slot);
    }
  } else if (!slot.ext_pending) {
    if (_rng.chance(_config.join_chance)) {
      try_join(slot);
    }
  }
}

bool
SimClient::policy_allows(const GroupSlot& slot) const
{
  switch (_config.auth_policy) {
    case AuthPolicy::first:
      return slot.creator;
    case AuthPolicy::last:
      return slot.newest;
    case AuthPolicy::random:
      return true;
  }
  return false;
}

void
SimClient::try_send_message(GroupSlot& slot)
{
  auto length =
    _rng.uniform_u64(_config.message_length_min, _config.message_length_max);
  auto plaintext = _rng.bytes(length);

  auto begin = cost_clock_us(_cost_source);
  auto message = slot.state->seal_application(plaintext);
  auto payload = message.serialize();
  auto cost = cost_clock_us(_cost_source) - begin;

  publish(group_topic(slot.group_id), payload);
  log_record(slot, Action::message, "-", payload.size(), _scheduler.now(),
             cost, slot.state->member_count());
}

void
SimClient::try_modification(GroupSlot& slot)
{
  // modifications are gated by the configured authorization policy in the
  // commit paradigm; in the propose paradigm anyone may propose and the
  // policy instead gates who commits the batch
  if (_config.paradigm == Paradigm::commit && !policy_allows(slot)) {
    return;
  }
  // one unresolved commit per group; a non-empty future buffer means this
  // client is behind the group and must not fork it
  if (slot.pending || !slot.future.empty()) {
    return;
  }

  auto kind_draw = _rng.uniform_real(0.0, 1.0);
  if (kind_draw < _config.invite_chance) {
    modify_invite(slot);
  } else if (kind_draw < _config.invite_chance + _config.remove_chance) {
    modify_remove(slot);
  } else {
    modify_update(slot);
  }
}

void
SimClient::modify_invite(GroupSlot& slot)
{
  auto members = member_identities(*slot.state);
  std::vector<std::string> candidates;
  for (const auto& user : _delivery->registered_users()) {
    if (members.count(user) == 0 && _delivery->key_package_count(user) > 0) {
      candidates.push_back(user);
    }
  }
  if (candidates.empty()) {
    _stats.skipped_modifications += 1;
    return;
  }
  const auto& target = candidates[_rng.pick_index(candidates.size())];
  auto kp_bytes = _delivery->take_key_package(target);
  if (!kp_bytes) {
    _stats.skipped_modifications += 1;
    return;
  }

  try {
    auto kp = KeyPackage::deserialize(*kp_bytes);
    Proposal proposal{ AddProposal{ kp } };
    if (_config.paradigm == Paradigm::commit) {
      CommitMeta meta;
      meta.action = Action::invite;
      meta.counterpart = target;
      commit_single(slot, { std::move(proposal) }, std::move(meta));
    } else {
      auto begin = cost_clock_us(_cost_source);
      auto message = slot.state->propose_add(kp);
      auto payload = message.serialize();
      auto cost = cost_clock_us(_cost_source) - begin;
      publish(group_topic(slot.group_id), payload);
      log_record(slot, Action::propose, target, payload.size(),
                 _scheduler.now(), cost, slot.state->member_count());
    }
  } catch (const Error&) {
    _stats.skipped_modifications += 1;
  }
}

void
SimClient::modify_remove(GroupSlot& slot)
{
  std::vector<LeafIndex> targets;
  for (auto leaf : slot.state->tree().member_leaves()) {
    if (leaf != slot.state->my_leaf()) {
      targets.push_back(leaf);
    }
  }
  if (targets.empty()) {
    _stats.skipped_modifications += 1;
    return;
  }
  auto target = targets[_rng.pick_index(targets.size())];
  auto target_identity = slot.state->tree().leaf_node(target)->identity;

  try {
    Proposal proposal{ RemoveProposal{ target } };
    if (_config.paradigm == Paradigm::commit) {
      CommitMeta meta;
      meta.action = Action::remove;
      meta.counterpart = target_identity;
      commit_single(slot, { std::move(proposal) }, std::move(meta));
    } else {
      auto begin = cost_clock_us(_cost_source);
      auto message = slot.state->propose_remove(target);
      auto payload = message.serialize();
      auto cost = cost_clock_us(_cost_source) - begin;
      publish(group_topic(slot.group_id), payload);
      log_record(slot, Action::propose, target_identity, payload.size(),
                 _scheduler.now(), cost, slot.state->member_count());
    }
  } catch (const Error&) {
    _stats.skipped_modifications += 1;
  }
}

void
SimClient::modify_update(GroupSlot& slot)
{
  try {
    if (_config.paradigm == Paradigm::commit) {
      // a self-update is a commit with an empty proposal list: the fresh
      // leaf travels in the commit's update path
      CommitMeta meta;
      meta.action = Action::update;
      meta.counterpart = "-";
      commit_single(slot, {}, std::move(meta));
    } else {
      auto begin = cost_clock_us(_cost_source);
      auto message = slot.state->propose_update(_rng);
      auto payload = message.serialize();
      auto cost = cost_clock_us(_cost_source) - begin;
      publish(group_topic(slot.group_id), payload);
      log_record(slot, Action::propose, "-", payload.size(), _scheduler.now(),
                 cost, slot.state->member_count());
    }
  } catch (const Error&) {
    _stats.skipped_modifications += 1;
  }
}

void
SimClient::commit_single(GroupSlot& slot,
                         std::vector<Proposal> proposals,
                         CommitMeta meta)
{
  auto begin = cost_clock_us(_cost_source);
  auto pending = slot.state->create_commit(_rng, proposals);
  auto payload = pending.message.serialize();
  auto cost = cost_clock_us(_cost_source) - begin;

  meta.size_bytes = payload.size();
  meta.generated_at = _scheduler.now();
  meta.cost_us = cost;
  meta.pre_size = slot.state->member_count();

  // pair each welcome with its target user, in add-proposal order
  std::vector<std::string> add_targets;
  for (const auto& proposal : proposals) {
    if (const auto* add = std::get_if<AddProposal>(&proposal.content)) {
      add_targets.push_back(add->key_package.leaf_node.identity);
    }
  }
  if (add_targets.size() != pending.welcomes.size()) {
    throw InvalidParameterError("welcome count does not match add count");
  }
  for (size_t i = 0; i < add_targets.size(); i++) {
    meta.welcomes.emplace_back(add_targets[i], pending.welcomes[i]);
  }

  publish(group_topic(slot.group_id), payload);
  slot.pending = std::move(pending);
  slot.pending_meta = std::move(meta);
}

SimClient::CommitMeta
SimClient::meta_for_batch(const GroupSlot& slot,
                          const std::vector<Proposal>& batch) const
{
  CommitMeta meta;
  if (batch.empty()) {
    return meta; // self-update commit
  }
  const auto& first = batch.front();
  switch (first.kind()) {
    case ProposalKind::add:
      meta.action = Action::invite;
      meta.counterpart =
        std::get<AddProposal>(first.content).key_package.leaf_node.identity;
      break;
    case ProposalKind::remove: {
      auto removed = std::get<RemoveProposal>(first.content).removed;
      const auto* leaf = slot.state->tree().leaf_node(removed);
      meta.action = Action::remove;
      meta.counterpart = leaf != nullptr ? leaf->identity : "-";
      break;
    }
    case ProposalKind::update:
      meta.action = Action::update;
      meta.counterpart = "-";
      break;
  }
  return meta;
}

void
SimClient::maybe_commit_batch(GroupSlot& slot)
{
  if (_config.paradigm != Paradigm::propose) {
    return;
  }
  if (slot.proposal_buffer.size() < _config.proposals_per_commit) {
    return;
  }
  if (slot.pending || !slot.future.empty()) {
    return;
  }
  if (!policy_allows(slot)) {
    return;
  }
  // under the Random policy the author of the batch-filling proposal
  // commits, so exactly one member elects itself
  if (_config.auth_policy == AuthPolicy::random && !slot.last_buffered_is_own) {
    return;
  }
  // a member cannot commit its own removal; leave the batch for another
  for (size_t i = 0; i < _config.proposals_per_commit; i++) {
    const auto* remove =
      std::get_if<RemoveProposal>(&slot.proposal_buffer[i].content);
    if (remove != nullptr && remove->removed == slot.state->my_leaf()) {
      return;
    }
  }

  std::vector<Proposal> batch(slot.proposal_buffer.begin(),
                              slot.proposal_buffer.begin() +
                                _config.proposals_per_commit);
  auto meta = meta_for_batch(slot, batch);
  try {
    commit_single(slot, std::move(batch), std::move(meta));
  } catch (const Error&) {
    _stats.skipped_modifications += 1;
  }
}

///
/// Joining
///

void
SimClient::try_join(GroupSlot& slot)
{
  if (_config.external_join) {
    if (auto stored = _delivery->fetch_group_info(slot.group_id)) {
      try {
        auto group_info = GroupInfo::deserialize(*stored);
        auto pre_size = group_info.tree.occupied();

        auto begin = cost_clock_us(_cost_source);
        auto join = GroupState::external_commit(_provider, _rng, group_info, _user);
        auto payload = join.message.serialize();
        auto cost = cost_clock_us(_cost_source) - begin;

        CommitMeta meta;
        meta.action = Action::join;
        meta.counterpart = "-";
        meta.size_bytes = payload.size();
        meta.generated_at = _scheduler.now();
        meta.cost_us = cost;
        meta.pre_size = std::max<uint64_t>(pre_size, 1);

        _delivery->subscribe(_session, group_topic(slot.group_id));
        slot.subscribed = true;
        publish(group_topic(slot.group_id), payload);
        slot.ext_pending = std::move(join);
        slot.ext_meta = std::move(meta);
        return;
      } catch (const Error&) {
        _stats.failed_joins += 1;
        return;
      }
    }
  }
  // no external path: make sure an unconsumed key package is available so
  // a member can invite this client
  ensure_key_package();
}

void
SimClient::ensure_key_package()
{
  if (_delivery->key_package_count(_user) > 0) {
    return;
  }
  auto kp_private = new_key_package(*_provider, _rng, _user);
  auto id = kp_private.key_package.id(*_provider);
  _delivery->publish_key_package(_user, kp_private.key_package.serialize());
  _key_packages.emplace(std::move(id), std::move(kp_private));
}

///
/// Delivery handling
///

void
SimClient::publish(const std::string& topic, const Bytes& payload)
{
  _delivery->publish(_session, topic, payload);
}

void
SimClient::publish_group_info(GroupSlot& slot)
{
  auto begin = cost_clock_us(_cost_source);
  auto group_info = slot.state->export_group_info();
  auto payload = group_info.serialize();
  auto cost = cost_clock_us(_cost_source) - begin;

  _delivery->store_group_info(slot.group_id, slot.state->epoch(), payload);
  log_record(slot, Action::group_info, "-", payload.size(), _scheduler.now(),
             cost, slot.state->member_count());
}

void
SimClient::on_deliver(const Envelope& envelope)
{
  if (envelope.payload.size() < 2 || envelope.payload[0] != wire_format_version) {
    _stats.malformed_payloads += 1;
    return;
  }

  if (envelope.topic == welcome_topic(_user)) {
    handle_welcome(envelope);
    return;
  }

  for (auto& [group_id, slot] : _slots) {
    if (envelope.topic != group_topic(group_id)) {
      continue;
    }
    const auto tag = envelope.payload[1];
    if (tag == 2) {
      handle_handshake(slot, envelope);
    } else if (tag == 5) {
      handle_application(slot, envelope);
    }
    return;
  }
}

void
SimClient::handle_welcome(const Envelope& envelope)
{
  Welcome welcome;
  try {
    welcome = Welcome::deserialize(envelope.payload);
  } catch (const Error&) {
    _stats.malformed_payloads += 1;
    return;
  }

  auto slot_it = _slots.find(welcome.context.group_id);
  if (slot_it == _slots.end()) {
    _stats.orphan_welcomes += 1;
    return;
  }
  auto& slot = slot_it->second;
  if (slot.state && !slot.state->evicted()) {
    _stats.orphan_welcomes += 1;
    return;
  }

  auto kp_it = _key_packages.find(welcome.key_package_id);
  if (kp_it == _key_packages.end()) {
    _stats.orphan_welcomes += 1;
    return;
  }

  std::optional<GroupState> state;
  auto begin = cost_clock_us(_cost_source);
  try {
    state = GroupState::process_welcome(_provider, welcome, kp_it->second);
  } catch (const Error&) {
    _stats.orphan_welcomes += 1;
    return;
  }
  auto cost = cost_clock_us(_cost_source) - begin;

  {
    const auto* committer = state->tree().leaf_node(welcome.committer_leaf);
    LogRecord record;
    record.group = slot.group_id;
    record.group_size = std::max<uint64_t>(state->member_count(), 2) - 1;
    record.actor = _user;
    record.action = Action::welcome;
    record.counterpart = committer != nullptr ? committer->identity : "-";
    record.size_bytes = envelope.payload.size();
    record.timestamp_ns = _scheduler.now();
    record.cost_us = cost;
    _sink.append(std::move(record));
  }

  _key_packages.erase(kp_it);
  if (slot.ext_pending) {
    // an invitation beat this client's own external join attempt
    slot.ext_pending.reset();
    slot.ext_meta.reset();
  }
  slot.state = std::move(*state);
  slot.newest = true;
  if (!slot.subscribed) {
    _delivery->subscribe(_session, group_topic(slot.group_id));
    slot.subscribed = true;
  }
  slot.future.clear();
  slot.proposal_buffer.clear();
  slot.buffered_ids.clear();
  slot.last_buffered_is_own = false;
}

void
SimClient::handle_handshake(GroupSlot& slot, const Envelope& envelope)
{
  HandshakeMessage message;
  try {
    message = HandshakeMessage::deserialize(envelope.payload);
  } catch (const Error&) {
    _stats.malformed_payloads += 1;
    return;
  }

  if (message.is_commit()) {
    handle_commit(slot, envelope, message);
  } else {
    handle_proposal(slot, envelope, message);
  }
}

bool
SimClient::conflicts_with_buffer(const GroupSlot& slot,
                                 const Proposal& proposal) const
{
  const auto touches = [](const Proposal& p) -> std::optional<LeafIndex> {
    if (const auto* update = std::get_if<UpdateProposal>(&p.content)) {
      return update->leaf;
    }
    if (const auto* remove = std::get_if<RemoveProposal>(&p.content)) {
      return remove->removed;
    }
    return std::nullopt;
  };

  if (const auto* add = std::get_if<AddProposal>(&proposal.content)) {
    const auto& identity = add->key_package.leaf_node.identity;
    if (slot.state->tree().find_identity(identity)) {
      return true;
    }
    for (const auto& buffered : slot.proposal_buffer) {
      const auto* other = std::get_if<AddProposal>(&buffered.content);
      if (other != nullptr &&
          other->key_package.leaf_node.identity == identity) {
        return true;
      }
    }
    return false;
  }

  const auto leaf = touches(proposal);
  for (const auto& buffered : slot.proposal_buffer) {
    if (touches(buffered) == leaf) {
      return true;
    }
  }
  return false;
}

void
SimClient::handle_proposal(GroupSlot& slot,
                           const Envelope& envelope,
                           const HandshakeMessage& message)
{
  if (!slot.state || slot.state->evicted()) {
    return;
  }
  if (message.epoch < slot.state->epoch()) {
    _stats.stale_proposals_dropped += 1;
    return;
  }
  if (message.epoch > slot.state->epoch()) {
    slot.future.push_back(envelope);
    return;
  }

  Proposal proposal;
  try {
    proposal = slot.state->process_proposal(message);
  } catch (const Error&) {
    _stats.stale_proposals_dropped += 1;
    return;
  }

  auto id = proposal.id(*_provider);
  if (!slot.buffered_ids.insert(id).second) {
    return; // duplicate
  }
  // keep the buffer committable: within one commit every leaf may be
  // touched once and added identities must be new
  if (conflicts_with_buffer(slot, proposal)) {
    _stats.conflicting_proposals += 1;
    return;
  }
  slot.proposal_buffer.push_back(std::move(proposal));
  slot.last_buffered_is_own = envelope.sender == _user;
  maybe_commit_batch(slot);
}

void
SimClient::handle_commit(GroupSlot& slot,
                         const Envelope& envelope,
                         const HandshakeMessage& message)
{
  if (slot.ext_pending && !slot.state) {
    if (message.epoch == slot.ext_pending->message.epoch) {
      add_candidate(slot, envelope);
    }
    return;
  }
  if (!slot.state || slot.state->evicted()) {
    return;
  }
  if (message.epoch < slot.state->epoch()) {
    _stats.stale_commits_dropped += 1;
    return;
  }
  if (message.epoch > slot.state->epoch()) {
    slot.future.push_back(envelope);
    return;
  }
  add_candidate(slot, envelope);
}

void
SimClient::add_candidate(GroupSlot& slot, const Envelope& envelope)
{
  if (_delivery->winner_rule() == WinnerRule::first_delivered) {
    resolve_commit(slot, envelope);
    return;
  }

  if (!slot.race) {
    slot.race = Race{};
    slot.race->epoch = slot.state            ? slot.state->epoch()
                       : slot.ext_pending    ? slot.ext_pending->message.epoch
                                             : 0;
    auto group_id = slot.group_id;
    _scheduler.schedule_after(_delivery->confirmation_window(),
                              [this, group_id] { decide_race(group_id); });
  }
  slot.race->candidates.push_back(envelope);
}

void
SimClient::decide_race(const std::string& group_id)
{
  auto& slot = _slots.at(group_id);
  if (!slot.race) {
    return;
  }
  auto race = std::move(*slot.race);
  slot.race.reset();
  auto winner = pick_winner(WinnerRule::min_message_id, race.candidates);
  resolve_commit(slot, race.candidates[winner]);
}

void
SimClient::resolve_commit(GroupSlot& slot, const Envelope& envelope)
{
  if (slot.ext_pending && !slot.state) {
    resolve_external_race(slot, envelope);
    return;
  }
  if (!slot.state || slot.state->evicted()) {
    return;
  }

  HandshakeMessage message;
  try {
    message = HandshakeMessage::deserialize(envelope.payload);
  } catch (const Error&) {
    _stats.malformed_payloads += 1;
    return;
  }
  if (message.epoch != slot.state->epoch()) {
    _stats.stale_commits_dropped += 1;
    return;
  }

  if (envelope.sender == _user && slot.pending) {
    adopt_own_commit(slot);
    return;
  }
  resolve_member_commit(slot, message);
}

void
SimClient::adopt_own_commit(GroupSlot& slot)
{
  auto pending = std::move(*slot.pending);
  auto meta = std::move(*slot.pending_meta);
  slot.pending.reset();
  slot.pending_meta.reset();

  slot.state = slot.state->merge_pending(pending);
  _stats.commits_won += 1;

  log_record(slot, meta.action, meta.counterpart, meta.size_bytes,
             meta.generated_at, meta.cost_us, meta.pre_size);

  for (const auto& [target, welcome] : meta.welcomes) {
    publish(welcome_topic(target), welcome.serialize());
  }
  publish_group_info(slot);

  after_epoch_advance(slot, !meta.welcomes.empty());
}

void
SimClient::resolve_member_commit(GroupSlot& slot, const HandshakeMessage& message)
{
  auto counterpart = committer_identity(*slot.state, message);
  auto pre_size = slot.state->member_count();

  std::optional<GroupState> next;
  auto begin = cost_clock_us(_cost_source);
  try {
    next = slot.state->process_commit(message);
  } catch (const Error&) {
    // the epoch's winner does not apply to this state: the group forked
    // around this member (a race candidate missed a confirmation window
    // somewhere); drop out and recover through the normal join paths
    _stats.desyncs += 1;
    leave_group(slot);
    return;
  }
  auto cost = cost_clock_us(_cost_source) - begin;
  log_record(slot, Action::process, counterpart, std::nullopt,
             _scheduler.now(), cost, pre_size);

  if (slot.pending) {
    slot.pending.reset();
    slot.pending_meta.reset();
    _stats.lost_races += 1;
  }

  bool added_others = message.sender.type == Sender::Type::external;
  for (const auto& proposal : message.commit().proposals) {
    if (proposal.kind() == ProposalKind::add) {
      added_others = true;
      break;
    }
  }

  if (next->evicted()) {
    slot.state = std::move(*next);
    leave_group(slot);
    return;
  }

  slot.state = std::move(*next);
  after_epoch_advance(slot, added_others);
}

void
SimClient::resolve_external_race(GroupSlot& slot, const Envelope& envelope)
{
  if (envelope.sender == _user) {
    auto join = std::move(*slot.ext_pending);
    auto meta = std::move(*slot.ext_meta);
    slot.ext_pending.reset();
    slot.ext_meta.reset();

    slot.state = *join.state;
    slot.newest = true;
    log_record(slot, meta.action, meta.counterpart, meta.size_bytes,
               meta.generated_at, meta.cost_us, meta.pre_size);
    publish_group_info(slot);
    after_epoch_advance(slot, true);
    return;
  }

  // someone else's commit claimed this epoch; without member state the
  // commit cannot be processed, so drop the attempt and retry later
  slot.ext_pending.reset();
  slot.ext_meta.reset();
  _stats.failed_joins += 1;
  if (slot.subscribed) {
    _delivery->unsubscribe(_session, group_topic(slot.group_id));
    slot.subscribed = false;
  }
  slot.future.clear();
}

void
SimClient::leave_group(GroupSlot& slot)
{
  if (slot.subscribed) {
    _delivery->unsubscribe(_session, group_topic(slot.group_id));
    slot.subscribed = false;
  }
  slot.state.reset();
  slot.pending.reset();
  slot.pending_meta.reset();
  slot.ext_pending.reset();
  slot.ext_meta.reset();
  slot.race.reset();
  slot.proposal_buffer.clear();
  slot.buffered_ids.clear();
  slot.last_buffered_is_own = false;
  slot.future.clear();
  slot.newest = false;
}

void
SimClient::after_epoch_advance(GroupSlot& slot, bool added_others)
{
  slot.proposal_buffer.clear();
  slot.buffered_ids.clear();
  slot.last_buffered_is_own = false;
  slot.race.reset();
  if (added_others) {
    slot.newest = false;
  }
  replay_future(slot);
}

void
SimClient::replay_future(GroupSlot& slot)
{
  if (!slot.state || slot.state->evicted()) {
    slot.future.clear();
    return;
  }

  auto pending = std::move(slot.future);
  slot.future.clear();
  for (const auto& envelope : pending) {
    const auto tag = envelope.payload.size() > 1 ? envelope.payload[1] : 0;
    if (!slot.state || slot.state->evicted()) {
      break;
    }
    if (tag == 2) {
      handle_handshake(slot, envelope);
    } else if (tag == 5) {
      handle_application(slot, envelope);
    }
  }
}

void
SimClient::handle_application(GroupSlot& slot, const Envelope& envelope)
{
  if (!slot.state || slot.state->evicted() || envelope.sender == _user) {
    return;
  }

  ApplicationMessage message;
  try {
    message = ApplicationMessage::deserialize(envelope.payload);
  } catch (const Error&) {
    _stats.malformed_payloads += 1;
    return;
  }

  if (message.epoch < slot.state->epoch()) {
    _stats.stale_app_dropped += 1;
    return;
  }
  if (message.epoch > slot.state->epoch()) {
    slot.future.push_back(envelope);
    return;
  }

  try {
    slot.state->open_application(message);
  } catch (const Error&) {
    _stats.app_open_failures += 1;
  }
}

///
/// Helpers
///

std::string
SimClient::committer_identity(const GroupState& pre_state,
                              const HandshakeMessage& message) const
{
  if (message.sender.type == Sender::Type::member) {
    const auto* leaf = pre_state.tree().leaf_node(message.sender.leaf);
    if (leaf != nullptr) {
      return leaf->identity;
    }
  } else if (message.is_commit()) {
    return message.commit().path.leaf_node.identity;
  }
  return "-";
}

std::set<std::string>
SimClient::member_identities(const GroupState& state) const
{
  std::set<std::string> identities;
  for (auto leaf : state.tree().member_leaves()) {
    identities.insert(state.tree().leaf_node(leaf)->identity);
  }
  return identities;
}

void
SimClient::log_record(const GroupSlot& slot,
                      Action action,
                      const std::string& counterpart,
                      std::optional<uint64_t> size_bytes,
                      VirtualTime timestamp,
                      uint64_t cost_us,
                      uint64_t group_size)
{
  LogRecord record;
  record.group = slot.group_id;
  record.group_size = std::max<uint64_t>(group_size, 1);
  record.actor = _user;
  record.action = action;
  record.counterpart = counterpart.empty() ? "-" : counterpart;
  record.size_bytes = size_bytes;
  record.timestamp_ns = timestamp;
  record.cost_us = cost_us;
  _sink.append(std::move(record));
}

const GroupState*
SimClient::group_state(const std::string& group_id) const
{
  auto it = _slots.find(group_id);
  if (it == _slots.end() || !it->second.state || it->second.state->evicted()) {
    return nullptr;
  }
  return &*it->second.state;
}

bool
SimClient::is_creator(const std::string& group_id) const
{
  auto it = _slots.find(group_id);
  return it != _slots.end() && it->second.creator;
}

uint32_t
SimClient::largest_group() const
{
  uint32_t largest = 0;
  for (const auto& [group_id, slot] : _slots) {
    if (slot.state && !slot.state->evicted()) {
      largest = std::max(largest, slot.state->member_count());
    }
  }
  return largest;
}

} // namespace cgkasim
