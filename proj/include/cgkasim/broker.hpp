#pragma once

#include "cgkasim/delivery.hpp"

#include <deque>
#include <map>
#include <set>

namespace cgkasim {

// Centralized pub-sub broker: every publish passes through the hub, which
// forwards it to each subscriber (including the sender when subscribed) over
// a per-subscriber FIFO channel. One latency sample covers the whole
// publisher-to-subscriber transfer. Subscribers therefore share a total
// per-topic delivery order, so the first commit delivered for an epoch is
// the winner for everyone.
class BrokerDeliveryService : public DeliveryService
{
public:
  BrokerDeliveryService(Scheduler& scheduler, LatencyModel link, uint64_t seed);

  std::string name() const override { return "mqtt"; }

  SessionId connect(const std::string& user, DeliverFn handler) override;
  void subscribe(SessionId session, const std::string& topic) override;
  void unsubscribe(SessionId session, const std::string& topic) override;
  void publish(SessionId session, const std::string& topic, const Bytes& payload) override;

  WinnerRule winner_rule() const override { return WinnerRule::first_delivered; }
  VirtualTime confirmation_window() const override { return 0; }

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

  uint64_t messages_published() const { return _messages_published; }

private:
  struct Session
  {
    std::string user;
    DeliverFn handler;
    std::set<std::string> topics;
    uint64_t publish_seq = 0;
    // FIFO clamp: no delivery may arrive before an earlier one.
    VirtualTime next_free = 0;
  };

  Session& session_at(SessionId id);

  Scheduler& _scheduler;
  LatencyModel _link;
  DeterministicRandom _rng;

  std::vector<Session> _sessions;
  // Subscribers per topic in subscription order (deterministic fan-out).
  std::map<std::string, std::vector<SessionId>> _subscribers;
  uint64_t _messages_published = 0;

  std::set<std::string> _users;
  std::map<std::string, std::string> _group_claims;
  std::map<std::string, std::deque<Bytes>> _key_packages;
  std::map<std::string, std::pair<uint64_t, Bytes>> _group_infos;
};

} // namespace cgkasim
