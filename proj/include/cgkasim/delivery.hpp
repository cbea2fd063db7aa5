#pragma once

#include "cgkasim/bytes.hpp"
#include "cgkasim/clock.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cgkasim {

// Topic naming shared by every delivery service.
std::string group_topic(const std::string& group_id);
std::string welcome_topic(const std::string& user_id);

// A published message as seen by subscribers.
struct Envelope
{
  std::string topic;
  std::string sender; // publishing user
  uint64_t sequence = 0; // per-sender publish counter
  Bytes payload;
  Bytes message_id; // hash over payload, sender, sequence
  VirtualTime published_at = 0;
};

Bytes compute_message_id(const std::string& sender,
                         uint64_t sequence,
                         const Bytes& payload);

using SessionId = uint32_t;
using DeliverFn = std::function<void(const Envelope&)>;

// How a service resolves racing commits for the same epoch.
enum class WinnerRule : uint8_t
{
  // Total per-topic order: the first commit delivered for an epoch wins.
  first_delivered,
  // No total order: every candidate seen within the confirmation window
  // competes and the smallest message id wins.
  min_message_id,
};

// Pure winner selection, usable directly in tests and by clients.
// Candidates must be non-empty; delivery order for first_delivered.
size_t pick_winner(WinnerRule rule, const std::vector<Envelope>& candidates);

// Topic-based pub-sub plus the signaling directory. Implementations schedule
// deliveries on the simulation scheduler; directory calls are synchronous
// (measured metrics exclude directory retrieval by design).
class DeliveryService
{
public:
  virtual ~DeliveryService() = default;

  virtual std::string name() const = 0;

  /// Pub-sub sessions

  virtual SessionId connect(const std::string& user, DeliverFn handler) = 0;
  virtual void subscribe(SessionId session, const std::string& topic) = 0;
  virtual void unsubscribe(SessionId session, const std::string& topic) = 0;
  virtual void publish(SessionId session, const std::string& topic, const Bytes& payload) = 0;

  /// Commit arbitration

  virtual WinnerRule winner_rule() const = 0;
  // How long a client must wait after first seeing a commit candidate before
  // declaring the winner (0 under first_delivered).
  virtual VirtualTime confirmation_window() const = 0;

  /// Signaling directory

  virtual void register_user(const std::string& user) = 0;
  virtual std::vector<std::string> registered_users() const = 0;
  // First caller per group wins and should create the group.
  virtual bool claim_group(const std::string& group_id, const std::string& user) = 0;

  virtual void publish_key_package(const std::string& user, const Bytes& key_package) = 0;
  // Consume one pre-published key package; each is handed out exactly once.
  virtual std::optional<Bytes> take_key_package(const std::string& user) = 0;
  virtual size_t key_package_count(const std::string& user) const = 0;

  // Keep whichever snapshot has the highest epoch.
  virtual void store_group_info(const std::string& group_id,
                                uint64_t epoch,
                                const Bytes& group_info) = 0;
  virtual std::optional<Bytes> fetch_group_info(const std::string& group_id) = 0;
};

} // namespace cgkasim
