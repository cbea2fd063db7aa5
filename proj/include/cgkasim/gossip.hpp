#pragma once

#include "cgkasim/delivery.hpp"

#include <deque>
#include <map>
#include <set>

namespace cgkasim {

struct GossipParams
{
  // Target mesh degree and the bounds heartbeat maintenance enforces.
  uint32_t degree = 4;
  uint32_t degree_low = 2;
  uint32_t degree_high = 8;
  double heartbeat_ms = 1000.0;
  // How many heartbeats a message stays retrievable via IWANT.
  uint32_t history_length = 5;
  // Non-mesh peers that receive IHAVE digests per topic per heartbeat.
  uint32_t gossip_fanout = 6;
  // Directory records are placed on this many rendezvous-selected peers.
  uint32_t replication = 3;
};

// Peer-to-peer pub-sub in the gossipsub style: every subscriber keeps a small
// mesh of full-message peers per topic, heartbeats repair mesh degree and
// advertise recent message ids (IHAVE) to peers outside the mesh, which fetch
// missing payloads on demand (IWANT). Messages are flooded along mesh edges
// with one latency sample per hop and deduplicated by message id, so the
// delivery order differs between peers; racing commits are settled by lowest
// message id within a confirmation window of two heartbeats. The signaling
// directory is replicated onto rendezvous-hashed peers with read-repair.
class GossipDeliveryService : public DeliveryService
{
public:
  GossipDeliveryService(Scheduler& scheduler,
                        LatencyModel link,
                        uint64_t seed,
                        GossipParams params = {});

  std::string name() const override { return "gossipsub"; }

  SessionId connect(const std::string& user, DeliverFn handler) override;
  void subscribe(SessionId session, const std::string& topic) override;
  void unsubscribe(SessionId session, const std::string& topic) override;
  void publish(SessionId session, const std::string& topic, const Bytes& payload) override;

  WinnerRule winner_rule() const override { return WinnerRule::min_message_id; }
  VirtualTime confirmation_window() const override
  {
    return 2 * ms_to_ns(_params.heartbeat_ms);
  }

  void register_user(const std::string& user) override;
  std::vector<std::string> registered_users() const override;
  bool claim_group(const std::string& group_id, const std::string& user) override;

  void publish_key_package(const std::string& user, const Bytes& key_package) override;
  std::optional<Bytes> take_key_package(const std::string& user) override;
  size_t key_package_count(const std::string& user) const override;

  void store_group_info(const std::string& group_id,
                        uint64_t epoch,
                        const Bytes& group_info) override;
  std::optional<Bytes> fetch_group_info(const std::string& group_id) override;

  /// Introspection (tests and diagnostics)

  const GossipParams& params() const { return _params; }
  size_t mesh_degree(SessionId session, const std::string& topic) const;
  uint64_t messages_sent() const { return _messages_sent; }
  // Which peers currently hold a directory record under the given key.
  std::vector<SessionId> directory_holders(const std::string& key) const;
  // The peers rendezvous hashing selects for a key right now.
  std::vector<SessionId> rendezvous_peers(const std::string& key) const;

private:
  struct DirectoryRecord
  {
    std::deque<Bytes> key_packages;
    uint64_t group_info_epoch = 0;
    Bytes group_info;
    std::string group_claim;
  };

  struct Peer
  {
    std::string user;
    DeliverFn handler;
    std::set<std::string> subscriptions;
    std::map<std::string, std::set<SessionId>> mesh;
    std::map<std::string, std::vector<SessionId>> fanout;
    std::set<Bytes> seen;
    std::map<Bytes, Envelope> cache;
    std::deque<std::vector<Bytes>> history;
    std::vector<Bytes> window;
    uint64_t publish_seq = 0;
    std::map<std::string, DirectoryRecord> store;
  };

  Peer& peer_at(SessionId id);
  const Peer& peer_at(SessionId id) const;

  std::vector<SessionId> pick_random(std::vector<SessionId> candidates, size_t count);
  std::vector<SessionId> topic_candidates(const std::string& topic,
                                          SessionId self,
                                          const std::set<SessionId>& exclude) const;

  void send_message(SessionId from, SessionId to, const Envelope& env);
  void send_graft(SessionId from, SessionId to, const std::string& topic);
  void send_prune(SessionId from, SessionId to, const std::string& topic);
  void send_ihave(SessionId from,
                  SessionId to,
                  const std::string& topic,
                  const std::vector<Bytes>& ids);
  void send_iwant(SessionId from, SessionId to, const std::vector<Bytes>& ids);

  void on_message(SessionId at, SessionId from, const Envelope& env);
  void on_graft(SessionId at, SessionId from, const std::string& topic);
  void on_prune(SessionId at, SessionId from, const std::string& topic);
  void on_ihave(SessionId at,
                SessionId from,
                const std::string& topic,
                const std::vector<Bytes>& ids);
  void on_iwant(SessionId at, SessionId from, const std::vector<Bytes>& ids);

  void remember(Peer& peer, const Envelope& env);
  void heartbeat(SessionId id);

  VirtualTime hop_delay() { return _link.sample(_rng); }

  Scheduler& _scheduler;
  LatencyModel _link;
  DeterministicRandom _rng;
  GossipParams _params;

  std::vector<Peer> _peers;
  std::map<std::string, std::vector<SessionId>> _topic_peers; // subscription order
  std::set<std::string> _users;
  uint64_t _messages_sent = 0;
};

} // namespace cgkasim
