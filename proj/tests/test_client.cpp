#include <doctest.h>

#include <cgkasim/broker.hpp>
#include <cgkasim/client.hpp>
#include <cgkasim/gossip.hpp>

#include <set>

using namespace cgkasim;

TEST_SUITE_BEGIN("client");

namespace {

ClientConfig
base_config()
{
  ClientConfig config;
  config.ds = "mqtt";
  config.groups = { "g" };
  config.external_join = false;
  config.join_chance = 0.0;
  config.issue_update_chance = 1.0;
  config.message_chance = 0.0;
  config.scale = false;
  config.auth_policy = AuthPolicy::random;
  config.message_length_min = 10;
  config.message_length_max = 50;
  config.sleep_millis_min = 100;
  config.sleep_millis_max = 500;
  config.paradigm = Paradigm::commit;
  config.proposals_per_commit = 1;
  config.invite_chance = 1.0;
  config.remove_chance = 0.0;
  config.update_chance = 0.0;
  config.replicas = 3;
  return config;
}

struct Net
{
  Scheduler sched;
  std::shared_ptr<DeliveryService> delivery;
  LogSink sink;
  std::shared_ptr<const CryptoProvider> provider = mock_provider();
  std::vector<std::unique_ptr<SimClient>> clients;

  explicit Net(bool gossip = false)
  {
    if (gossip) {
      delivery = std::make_shared<GossipDeliveryService>(
        sched, LatencyModel::constant(5.0), 1);
    } else {
      delivery = std::make_shared<BrokerDeliveryService>(
        sched, LatencyModel::constant(5.0), 1);
    }
  }

  SimClient& add(const std::string& id, const ClientConfig& config, uint64_t seed)
  {
    clients.push_back(std::make_unique<SimClient>(
      id, config, provider, delivery, sched, sink, seed, CostSource::zero));
    return *clients.back();
  }

  void run_for(double ms)
  {
    for (auto& client : clients) {
      client->start(0);
    }
    sched.set_horizon(ms_to_ns(ms));
    sched.run();
  }
};

std::vector<std::string>
formatted(const LogSink& sink)
{
  std::vector<std::string> lines;
  for (const auto& record : sink.records()) {
    lines.push_back(record.format());
  }
  return lines;
}

} // namespace

TEST_CASE("invite-only clients grow the group and log well-formed records")
{
  Net net;
  const auto config = base_config();
  net.add("u_a", config, 11);
  net.add("u_b", config, 22);
  net.add("u_c", config, 33);
  net.run_for(20000);

  const auto& records = net.sink.records();
  REQUIRE_FALSE(records.empty());

  // the first started client wins the claim and creates the group
  CHECK(net.clients[0]->is_creator("g"));
  CHECK(records[0].actor == "u_a");
  CHECK(records[0].action == Action::group_info);
  CHECK(records[0].group_size == 1);

  uint64_t peak = 0;
  const std::set<std::string> ids = { "u_a", "u_b", "u_c" };
  std::set<std::string> committers;
  for (const auto& record : records) {
    // grammar round trip
    CHECK(LogRecord::parse(record.format()).format() == record.format());
    CHECK(record.group == "g");
    CHECK(ids.count(record.actor) == 1);
    CHECK(record.cost_us == 0); // zero cost source
    peak = std::max(peak, record.group_size);
    if (record.action == Action::invite) {
      CHECK(ids.count(record.counterpart) == 1);
      CHECK(record.counterpart != record.actor);
      committers.insert(record.actor);
    }
    if (record.action == Action::process) {
      CHECK_FALSE(record.size_bytes.has_value());
      CHECK(committers.count(record.counterpart) == 1);
    }
    if (record.action == Action::welcome) {
      CHECK(committers.count(record.counterpart) == 1);
    }
  }
  CHECK(peak == 3);

  uint64_t commits = 0;
  for (const auto& record : records) {
    if (is_commit_action(record.action)) {
      commits++;
    }
  }
  // two members were added, then update commits keep flowing
  CHECK(commits >= 2);

  ClientStats totals;
  for (const auto& client : net.clients) {
    totals.malformed_payloads += client->stats().malformed_payloads;
    totals.orphan_welcomes += client->stats().orphan_welcomes;
    totals.app_open_failures += client->stats().app_open_failures;
    totals.commits_won += client->stats().commits_won;
  }
  CHECK(totals.malformed_payloads == 0);
  CHECK(totals.orphan_welcomes == 0);
  CHECK(totals.app_open_failures == 0);
  CHECK(totals.commits_won == commits);
}

TEST_CASE("identical seeds replay identical logs")
{
  auto run_once = [] {
    Net net;
    const auto config = base_config();
    net.add("u_a", config, 11);
    net.add("u_b", config, 22);
    net.add("u_c", config, 33);
    net.run_for(15000);
    return formatted(net.sink);
  };
  const auto first = run_once();
  const auto second = run_once();
  CHECK_FALSE(first.empty());
  CHECK(first == second);

  Net diverged;
  const auto config = base_config();
  diverged.add("u_a", config, 11);
  diverged.add("u_b", config, 22);
  diverged.add("u_c", config, 99); // one different client seed
  diverged.run_for(15000);
  CHECK(formatted(diverged.sink) != first);
}

TEST_CASE("a lone member sends application traffic at its own pace")
{
  Net net;
  auto config = base_config();
  config.replicas = 1;
  config.message_chance = 1.0;
  config.issue_update_chance = 0.0;
  net.add("solo", config, 5);
  net.run_for(10000);

  const auto& records = net.sink.records();
  std::vector<const LogRecord*> messages;
  for (const auto& record : records) {
    if (record.action == Action::message) {
      messages.push_back(&record);
    }
  }
  REQUIRE(messages.size() > 5);

  for (size_t i = 0; i < messages.size(); i++) {
    CHECK(messages[i]->group_size == 1);
    // wire size covers the drawn plaintext plus framing overhead
    CHECK(*messages[i]->size_bytes >= 10);
    CHECK(*messages[i]->size_bytes <= 50 + 128);
    if (i > 0) {
      const auto gap = messages[i]->timestamp_ns - messages[i - 1]->timestamp_ns;
      CHECK(gap >= ms_to_ns(100));
      CHECK(gap <= ms_to_ns(500));
    }
  }

  // no modifications were configured, so none happened
  for (const auto& record : records) {
    CHECK(record.action != Action::invite);
    CHECK(record.action != Action::update);
  }
}

TEST_CASE("first policy keeps the creator as the only committer")
{
  Net net;
  auto config = base_config();
  config.auth_policy = AuthPolicy::first;
  net.add("u_a", config, 1);
  net.add("u_b", config, 2);
  net.add("u_c", config, 3);
  net.run_for(20000);

  bool saw_commit = false;
  for (const auto& record : net.sink.records()) {
    if (is_commit_action(record.action)) {
      saw_commit = true;
      CHECK(record.actor == "u_a");
    }
  }
  CHECK(saw_commit);
}

TEST_CASE("removals shrink the group and the victim stops acting in it")
{
  Net net;
  auto config = base_config();
  config.invite_chance = 0.6;
  config.remove_chance = 0.4;
  net.add("u_a", config, 7);
  net.add("u_b", config, 8);
  net.add("u_c", config, 9);
  net.run_for(60000);

  const auto& records = net.sink.records();
  uint64_t removes = 0;
  for (const auto& record : records) {
    if (record.action == Action::remove) {
      removes++;
      CHECK(record.counterpart != record.actor);
    }
  }
  CHECK(removes > 0);

  ClientStats totals;
  for (const auto& client : net.clients) {
    totals.malformed_payloads += client->stats().malformed_payloads;
    totals.app_open_failures += client->stats().app_open_failures;
  }
  CHECK(totals.malformed_payloads == 0);
  CHECK(totals.app_open_failures == 0);
}

TEST_CASE("propose paradigm batches exactly proposals_per_commit modifications")
{
  Net net;
  auto config = base_config();
  config.paradigm = Paradigm::propose;
  config.proposals_per_commit = 2;
  net.add("u_a", config, 41);
  net.add("u_b", config, 42);
  net.add("u_c", config, 43);
  net.run_for(30000);

  const auto& records = net.sink.records();
  uint64_t proposals = 0;
  uint64_t commits = 0;
  for (const auto& record : records) {
    if (record.action == Action::propose) {
      proposals++;
      CHECK(record.size_bytes.has_value());
    } else if (is_commit_action(record.action)) {
      commits++;
    }
  }
  CHECK(commits >= 1);
  // every commit consumed exactly two buffered proposals
  CHECK(proposals >= 2 * commits);
}

TEST_CASE("external joiners enter through published group info over gossip")
{
  Net net(true);
  auto config = base_config();
  config.ds = "gossipsub";
  config.external_join = true;
  config.join_chance = 0.8;
  config.issue_update_chance = 0.2;
  config.invite_chance = 0.0;
  config.update_chance = 1.0;
  net.add("u_a", config, 51);
  net.add("u_b", config, 52);
  net.add("u_c", config, 53);
  net.run_for(40000);

  uint64_t joins = 0;
  uint64_t peak = 0;
  for (const auto& record : net.sink.records()) {
    peak = std::max(peak, record.group_size);
    if (record.action == Action::join) {
      joins++;
      CHECK(record.size_bytes.has_value());
    }
  }
  CHECK(joins >= 2);
  CHECK(peak == 3);
}

TEST_CASE("cpu cost source records real nonzero effort for cryptographic work")
{
  Scheduler sched;
  auto delivery = std::make_shared<BrokerDeliveryService>(
    sched, LatencyModel::constant(5.0), 1);
  LogSink sink;
  auto provider = sodium_provider();
  auto config = base_config();
  config.replicas = 2;

  SimClient a("u_a", config, provider, delivery, sched, sink, 1, CostSource::cpu);
  SimClient b("u_b", config, provider, delivery, sched, sink, 2, CostSource::cpu);
  a.start(0);
  b.start(0);
  sched.set_horizon(ms_to_ns(5000));
  sched.run();

  uint64_t total_cost = 0;
  for (const auto& record : sink.records()) {
    total_cost += record.cost_us;
  }
  CHECK(total_cost > 0);
}

TEST_SUITE_END();
