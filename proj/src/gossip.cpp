#include "cgkasim/gossip.hpp"

#include "cgkasim/codec.hpp"
#include "cgkasim/errors.hpp"

#include <algorithm>
#include <sodium.h>

namespace cgkasim {

GossipDeliveryService::GossipDeliveryService(Scheduler& scheduler,
                                             LatencyModel link,
                                             uint64_t seed,
                                             GossipParams params)
  : _scheduler(scheduler)
  , _link(link)
  , _rng(seed)
  , _params(params)
{
}

GossipDeliveryService::Peer&
GossipDeliveryService::peer_at(SessionId id)
{
  if (id >= _peers.size()) {
    throw NotConnected("unknown session");
  }
  return _peers[id];
}

const GossipDeliveryService::Peer&
GossipDeliveryService::peer_at(SessionId id) const
{
  if (id >= _peers.size()) {
    throw NotConnected("unknown session");
  }
  return _peers[id];
}

SessionId
GossipDeliveryService::connect(const std::string& user, DeliverFn handler)
{
  for (const auto& p : _peers) {
    if (p.user == user) {
      throw DuplicateUser("user already has a session: " + user);
    }
  }
  Peer p;
  p.user = user;
  p.handler = std::move(handler);
  _peers.push_back(std::move(p));
  const auto id = static_cast<SessionId>(_peers.size() - 1);

  // Stagger heartbeats slightly so peers do not all fire on the same tick.
  const VirtualTime first =
    ms_to_ns(_params.heartbeat_ms) + ms_to_ns(1.0) * (id + 1);
  _scheduler.schedule_after(first, [this, id] { heartbeat(id); });
  return id;
}

std::vector<SessionId>
GossipDeliveryService::pick_random(std::vector<SessionId> candidates, size_t count)
{
  if (candidates.size() <= count) {
    return candidates;
  }
  // Partial Fisher-Yates over the first `count` slots.
  for (size_t i = 0; i < count; i++) {
    const size_t j = i + _rng.pick_index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(count);
  return candidates;
}

std::vector<SessionId>
GossipDeliveryService::topic_candidates(const std::string& topic,
                                        SessionId self,
                                        const std::set<SessionId>& exclude) const
{
  std::vector<SessionId> out;
  const auto it = _topic_peers.find(topic);
  if (it == _topic_peers.end()) {
    return out;
  }
  for (const SessionId peer : it->second) {
    if (peer != self && exclude.count(peer) == 0) {
      out.push_back(peer);
    }
  }
  return out;
}

void
GossipDeliveryService::subscribe(SessionId session, const std::string& topic)
{
  auto& peer = peer_at(session);
  if (!peer.subscriptions.insert(topic).second) {
    return;
  }
  _topic_peers[topic].push_back(session);

  const auto chosen =
    pick_random(topic_candidates(topic, session, {}), _params.degree);
  for (const SessionId other : chosen) {
    peer.mesh[topic].insert(other);
    send_graft(session, other, topic);
  }
}

void
GossipDeliveryService::unsubscribe(SessionId session, const std::string& topic)
{
  auto& peer = peer_at(session);
  if (peer.subscriptions.erase(topic) == 0) {
    return;
  }
  for (const SessionId other : peer.mesh[topic]) {
    send_prune(session, other, topic);
  }
  peer.mesh.erase(topic);
  peer.fanout.erase(topic);
  auto& subs = _topic_peers[topic];
  subs.erase(std::remove(subs.begin(), subs.end(), session), subs.end());
}

void
GossipDeliveryService::remember(Peer& peer, const Envelope& env)
{
  peer.seen.insert(env.message_id);
  peer.cache[env.message_id] = env;
  peer.window.push_back(env.message_id);
}

void
GossipDeliveryService::publish(SessionId session, const std::string& topic, const Bytes& payload)
{
  auto& peer = peer_at(session);

  Envelope env;
  env.topic = topic;
  env.sender = peer.user;
  env.sequence = peer.publish_seq++;
  env.payload = payload;
  env.message_id = compute_message_id(env.sender, env.sequence, payload);
  env.published_at = _scheduler.now();

  remember(peer, env);

  // Local echo for the publisher's own subscription.
  if (peer.subscriptions.count(topic) > 0) {
    _scheduler.schedule_after(0, [this, session, env] {
      auto& p = _peers[session];
      if (p.handler && p.subscriptions.count(env.topic) > 0) {
        p.handler(env);
      }
    });
  }

  std::vector<SessionId> targets;
  if (peer.subscriptions.count(topic) > 0 && !peer.mesh[topic].empty()) {
    targets.assign(peer.mesh[topic].begin(), peer.mesh[topic].end());
  } else {
    // Publishing outside the mesh: keep a sticky fanout of subscribed peers.
    auto& fanout = peer.fanout[topic];
    std::erase_if(fanout, [this, &topic](SessionId p) {
      return _peers[p].subscriptions.count(topic) == 0;
    });
    if (fanout.size() < _params.degree) {
      std::set<SessionId> exclude(fanout.begin(), fanout.end());
      for (const SessionId extra :
           pick_random(topic_candidates(topic, session, exclude),
                       _params.degree - fanout.size())) {
        fanout.push_back(extra);
      }
    }
    targets = fanout;
  }
  for (const SessionId other : targets) {
    send_message(session, other, env);
  }
}

///
/// RPC transport: one latency sample per hop
///

void
GossipDeliveryService::send_message(SessionId from, SessionId to, const Envelope& env)
{
  _messages_sent++;
  _scheduler.schedule_after(hop_delay(), [this, from, to, env] { on_message(to, from, env); });
}

void
GossipDeliveryService::send_graft(SessionId from, SessionId to, const std::string& topic)
{
  _scheduler.schedule_after(hop_delay(), [this, from, to, topic] { on_graft(to, from, topic); });
}

void
GossipDeliveryService::send_prune(SessionId from, SessionId to, const std::string& topic)
{
  _scheduler.schedule_after(hop_delay(), [this, from, to, topic] { on_prune(to, from, topic); });
}

void
GossipDeliveryService::send_ihave(SessionId from,
                                  SessionId to,
                                  const std::string& topic,
                                  const std::vector<Bytes>& ids)
{
  _scheduler.schedule_after(hop_delay(),
                            [this, from, to, topic, ids] { on_ihave(to, from, topic, ids); });
}

void
GossipDeliveryService::send_iwant(SessionId from, SessionId to, const std::vector<Bytes>& ids)
{
  _scheduler.schedule_after(hop_delay(), [this, from, to, ids] { on_iwant(to, from, ids); });
}

///
/// RPC handlers
///

void
GossipDeliveryService::on_message(SessionId at, SessionId from, const Envelope& env)
{
  auto& peer = _peers[at];
  if (peer.seen.count(env.message_id) > 0) {
    return;
  }
  remember(peer, env);

  if (peer.handler && peer.subscriptions.count(env.topic) > 0) {
    peer.handler(env);
  }

  // Eager push to the rest of this peer's mesh.
  const auto mesh_it = peer.mesh.find(env.topic);
  if (mesh_it != peer.mesh.end()) {
    for (const SessionId other : mesh_it->second) {
      if (other != from) {
        send_message(at, other, env);
      }
    }
  }
}

void
GossipDeliveryService::on_graft(SessionId at, SessionId from, const std::string& topic)
{
  auto& peer = _peers[at];
  if (peer.subscriptions.count(topic) > 0) {
    peer.mesh[topic].insert(from);
  } else {
    send_prune(at, from, topic);
  }
}

void
GossipDeliveryService::on_prune(SessionId at, SessionId from, const std::string& topic)
{
  auto& peer = _peers[at];
  const auto it = peer.mesh.find(topic);
  if (it != peer.mesh.end()) {
    it->second.erase(from);
  }
}

void
GossipDeliveryService::on_ihave(SessionId at,
                                SessionId from,
                                const std::string& topic,
                                const std::vector<Bytes>& ids)
{
  auto& peer = _peers[at];
  if (peer.subscriptions.count(topic) == 0) {
    return;
  }
  std::vector<Bytes> wanted;
  for (const auto& id : ids) {
    if (peer.seen.count(id) == 0) {
      wanted.push_back(id);
    }
  }
  if (!wanted.empty()) {
    send_iwant(at, from, wanted);
  }
}

void
GossipDeliveryService::on_iwant(SessionId at, SessionId from, const std::vector<Bytes>& ids)
{
  auto& peer = _peers[at];
  for (const auto& id : ids) {
    const auto it = peer.cache.find(id);
    if (it != peer.cache.end()) {
      send_message(at, from, it->second);
    }
  }
}

///
/// Heartbeat
///

void
GossipDeliveryService::heartbeat(SessionId id)
{
  auto& peer = _peers[id];

  for (const auto& topic : peer.subscriptions) {
    auto& mesh = peer.mesh[topic];

    // Drop mesh members that are no longer subscribed.
    for (auto it = mesh.begin(); it != mesh.end();) {
      if (_peers[*it].subscriptions.count(topic) == 0) {
        it = mesh.erase(it);
      } else {
        ++it;
      }
    }

    if (mesh.size() < _params.degree_low) {
      const auto extra = pick_random(topic_candidates(topic, id, mesh),
                                     _params.degree - mesh.size());
      for (const SessionId other : extra) {
        mesh.insert(other);
        send_graft(id, other, topic);
      }
    } else if (mesh.size() > _params.degree_high) {
      std::vector<SessionId> members(mesh.begin(), mesh.end());
      const auto keep = pick_random(members, _params.degree);
      const std::set<SessionId> keep_set(keep.begin(), keep.end());
      for (const SessionId other : members) {
        if (keep_set.count(other) == 0) {
          mesh.erase(other);
          send_prune(id, other, topic);
        }
      }
    }

    // Lazy gossip: advertise recent ids to peers outside the mesh.
    std::vector<Bytes> recent;
    for (const auto& window : peer.history) {
      for (const auto& msg_id : window) {
        const auto it = peer.cache.find(msg_id);
        if (it != peer.cache.end() && it->second.topic == topic) {
          recent.push_back(msg_id);
        }
      }
    }
    if (!recent.empty()) {
      const auto targets = pick_random(topic_candidates(topic, id, mesh),
                                       _params.gossip_fanout);
      for (const SessionId other : targets) {
        send_ihave(id, other, topic, recent);
      }
    }
  }

  // Rotate the message-cache window.
  peer.history.push_front(peer.window);
  peer.window.clear();
  while (peer.history.size() > _params.history_length) {
    for (const auto& msg_id : peer.history.back()) {
      peer.cache.erase(msg_id);
    }
    peer.history.pop_back();
  }

  _scheduler.schedule_after(ms_to_ns(_params.heartbeat_ms), [this, id] { heartbeat(id); });
}

///
/// Signaling directory (rendezvous placement with read-repair)
///

void
GossipDeliveryService::register_user(const std::string& user)
{
  _users.insert(user);
}

std::vector<std::string>
GossipDeliveryService::registered_users() const
{
  return { _users.begin(), _users.end() };
}

std::vector<SessionId>
GossipDeliveryService::rendezvous_peers(const std::string& key) const
{
  std::vector<std::pair<Bytes, SessionId>> scored;
  scored.reserve(_peers.size());
  for (SessionId id = 0; id < _peers.size(); id++) {
    Writer w;
    w.str(key);
    w.str(_peers[id].user);
    Bytes score(secret_size);
    crypto_generichash(
      score.data(), score.size(), w.out().data(), w.out().size(), nullptr, 0);
    scored.emplace_back(std::move(score), id);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<SessionId> out;
  for (size_t i = 0; i < scored.size() && i < _params.replication; i++) {
    out.push_back(scored[i].second);
  }
  return out;
}

std::vector<SessionId>
GossipDeliveryService::directory_holders(const std::string& key) const
{
  std::vector<SessionId> out;
  for (SessionId id = 0; id < _peers.size(); id++) {
    if (_peers[id].store.count(key) > 0) {
      out.push_back(id);
    }
  }
  return out;
}

bool
GossipDeliveryService::claim_group(const std::string& group_id, const std::string& user)
{
  const std::string key = "claim/" + group_id;
  // An existing claim anywhere (even on stale replicas) wins.
  for (const auto& peer : _peers) {
    const auto it = peer.store.find(key);
    if (it != peer.store.end() && !it->second.group_claim.empty()) {
      return it->second.group_claim == user;
    }
  }
  for (const SessionId id : rendezvous_peers(key)) {
    _peers[id].store[key].group_claim = user;
  }
  return true;
}

void
GossipDeliveryService::publish_key_package(const std::string& user, const Bytes& key_package)
{
  const std::string key = "kp/" + user;
  for (const SessionId id : rendezvous_peers(key)) {
    _peers[id].store[key].key_packages.push_back(key_package);
  }
}

std::optional<Bytes>
GossipDeliveryService::take_key_package(const std::string& user)
{
  const std::string key = "kp/" + user;
  std::optional<Bytes> taken;
  for (const SessionId id : rendezvous_peers(key)) {
    auto it = _peers[id].store.find(key);
    if (it != _peers[id].store.end() && !it->second.key_packages.empty()) {
      taken = it->second.key_packages.front();
      break;
    }
  }
  if (!taken) {
    // Rendezvous set may have shifted since the store; scan everywhere.
    for (auto& peer : _peers) {
      auto it = peer.store.find(key);
      if (it != peer.store.end() && !it->second.key_packages.empty()) {
        taken = it->second.key_packages.front();
        break;
      }
    }
  }
  if (!taken) {
    return std::nullopt;
  }
  // Consume the copy everywhere so the package is handed out exactly once.
  for (auto& peer : _peers) {
    auto it = peer.store.find(key);
    if (it == peer.store.end()) {
      continue;
    }
    auto& q = it->second.key_packages;
    const auto pos = std::find(q.begin(), q.end(), *taken);
    if (pos != q.end()) {
      q.erase(pos);
    }
  }
  return taken;
}

size_t
GossipDeliveryService::key_package_count(const std::string& user) const
{
  const std::string key = "kp/" + user;
  size_t best = 0;
  for (const auto& peer : _peers) {
    const auto it = peer.store.find(key);
    if (it != peer.store.end()) {
      best = std::max(best, it->second.key_packages.size());
    }
  }
  return best;
}

void
GossipDeliveryService::store_group_info(const std::string& group_id,
                                        uint64_t epoch,
                                        const Bytes& group_info)
{
  const std::string key = "gi/" + group_id;
  for (const SessionId id : rendezvous_peers(key)) {
    auto& record = _peers[id].store[key];
    if (record.group_info.empty() || epoch >= record.group_info_epoch) {
      record.group_info_epoch = epoch;
      record.group_info = group_info;
    }
  }
}

std::optional<Bytes>
GossipDeliveryService::fetch_group_info(const std::string& group_id)
{
  const std::string key = "gi/" + group_id;
  const auto replicas = rendezvous_peers(key);

  uint64_t best_epoch = 0;
  Bytes best;
  for (const SessionId id : replicas) {
    const auto it = _peers[id].store.find(key);
    if (it != _peers[id].store.end() && !it->second.group_info.empty() &&
        (best.empty() || it->second.group_info_epoch > best_epoch)) {
      best_epoch = it->second.group_info_epoch;
      best = it->second.group_info;
    }
  }
  if (best.empty()) {
    for (const auto& peer : _peers) {
      const auto it = peer.store.find(key);
      if (it != peer.store.end() && !it->second.group_info.empty() &&
          (best.empty() || it->second.group_info_epoch > best_epoch)) {
        best_epoch = it->second.group_info_epoch;
        best = it->second.group_info;
      }
    }
  }
  if (best.empty()) {
    return std::nullopt;
  }
  // Read-repair: make sure the current rendezvous replicas hold the value.
  for (const SessionId id : replicas) {
    auto& record = _peers[id].store[key];
    if (record.group_info.empty() || record.group_info_epoch < best_epoch) {
      record.group_info_epoch = best_epoch;
      record.group_info = best;
    }
  }
  return best;
}

size_t
GossipDeliveryService::mesh_degree(SessionId session, const std::string& topic) const
{
  const auto& peer = peer_at(session);
  const auto it = peer.mesh.find(topic);
  return it == peer.mesh.end() ? 0 : it->second.size();
}

} // namespace cgkasim
