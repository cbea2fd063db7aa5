#include "cgkasim/broker.hpp"

#include "cgkasim/errors.hpp"

#include <algorithm>

namespace cgkasim {

BrokerDeliveryService::BrokerDeliveryService(Scheduler& scheduler,
                                             LatencyModel link,
                                             uint64_t seed)
  : _scheduler(scheduler)
  , _link(link)
  , _rng(seed)
{
}

BrokerDeliveryService::Session&
BrokerDeliveryService::session_at(SessionId id)
{
  if (id >= _sessions.size()) {
    throw NotConnected("unknown session");
  }
  return _sessions[id];
}

SessionId
BrokerDeliveryService::connect(const std::string& user, DeliverFn handler)
{
  for (const auto& s : _sessions) {
    if (s.user == user) {
      throw DuplicateUser("user already has a session: " + user);
    }
  }
  Session s;
  s.user = user;
  s.handler = std::move(handler);
  _sessions.push_back(std::move(s));
  return static_cast<SessionId>(_sessions.size() - 1);
}

void
BrokerDeliveryService::subscribe(SessionId session, const std::string& topic)
{
  auto& s = session_at(session);
  if (!s.topics.insert(topic).second) {
    return; // already subscribed
  }
  _subscribers[topic].push_back(session);
}

void
BrokerDeliveryService::unsubscribe(SessionId session, const std::string& topic)
{
  auto& s = session_at(session);
  if (s.topics.erase(topic) == 0) {
    return;
  }
  auto& subs = _subscribers[topic];
  subs.erase(std::remove(subs.begin(), subs.end(), session), subs.end());
}

void
BrokerDeliveryService::publish(SessionId session, const std::string& topic, const Bytes& payload)
{
  auto& sender = session_at(session);

  Envelope env;
  env.topic = topic;
  env.sender = sender.user;
  env.sequence = sender.publish_seq++;
  env.payload = payload;
  env.message_id = compute_message_id(env.sender, env.sequence, payload);
  env.published_at = _scheduler.now();
  _messages_published++;

  const auto it = _subscribers.find(topic);
  if (it == _subscribers.end()) {
    return;
  }
  for (const SessionId sub : it->second) {
    auto& receiver = _sessions[sub];
    const VirtualTime arrival =
      std::max(receiver.next_free, _scheduler.now() + _link.sample(_rng));
    receiver.next_free = arrival;
    _scheduler.schedule_at(arrival, [this, sub, env] {
      auto& r = _sessions[sub];
      // Deliver only if still subscribed at arrival time.
      if (r.handler && r.topics.count(env.topic) > 0) {
        r.handler(env);
      }
    });
  }
}

void
BrokerDeliveryService::register_user(const std::string& user)
{
  _users.insert(user);
}

std::vector<std::string>
BrokerDeliveryService::registered_users() const
{
  return { _users.begin(), _users.end() };
}

bool
BrokerDeliveryService::claim_group(const std::string& group_id, const std::string& user)
{
  const auto [it, inserted] = _group_claims.emplace(group_id, user);
  return inserted || it->second == user;
}

void
BrokerDeliveryService::publish_key_package(const std::string& user, const Bytes& key_package)
{
  _key_packages[user].push_back(key_package);
}

std::optional<Bytes>
BrokerDeliveryService::take_key_package(const std::string& user)
{
  const auto it = _key_packages.find(user);
  if (it == _key_packages.end() || it->second.empty()) {
    return std::nullopt;
  }
  Bytes kp = it->second.front();
  it->second.pop_front();
  return kp;
}

size_t
BrokerDeliveryService::key_package_count(const std::string& user) const
{
  const auto it = _key_packages.find(user);
  return it == _key_packages.end() ? 0 : it->second.size();
}

void
BrokerDeliveryService::store_group_info(const std::string& group_id,
                                        uint64_t epoch,
                                        const Bytes& group_info)
{
  const auto it = _group_infos.find(group_id);
  if (it == _group_infos.end() || epoch >= it->second.first) {
    _group_infos[group_id] = { epoch, group_info };
  }
}

std::optional<Bytes>
BrokerDeliveryService::fetch_group_info(const std::string& group_id)
{
  const auto it = _group_infos.find(group_id);
  if (it == _group_infos.end()) {
    return std::nullopt;
  }
  return it->second.second;
}

} // namespace cgkasim
