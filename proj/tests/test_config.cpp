#include <doctest.h>

#include <cgkasim/config.hpp>

using namespace cgkasim;

TEST_SUITE_BEGIN("config");

namespace {

const char* full_config = R"(
# comment line
[cgka]
ds = "mqtt"
groups = ["group_1", "group_2"]
external_join = true
join_chance = 0.2
issue_update_chance = 0.8   # trailing comment
message_chance = 0.5
scale = true
auth_policy = "Random"
message_length_min = 10
message_length_max = 100
sleep_millis_min = 100
sleep_millis_max = 3000

[paradigm]
paradigm = "propose"
proposals_per_commit = 4
invite_chance = 0.4
remove_chance = 0.1
update_chance = 0.5

[http_server]
url = "http://localhost:8080"

[mqtt]
url = "tcp://localhost:1883"

[meta]
replicas = 8
)";

std::string
patched(const std::string& from, const std::string& to)
{
  std::string text = full_config;
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  return text;
}

} // namespace

TEST_CASE("full configuration parses into every field")
{
  const auto config = parse_client_config(full_config);
  CHECK(config.ds == "mqtt");
  CHECK(config.groups == std::vector<std::string>{ "group_1", "group_2" });
  CHECK(config.external_join);
  CHECK(config.join_chance == doctest::Approx(0.2));
  CHECK(config.issue_update_chance == doctest::Approx(0.8));
  CHECK(config.message_chance == doctest::Approx(0.5));
  CHECK(config.scale);
  CHECK(config.auth_policy == AuthPolicy::random);
  CHECK(config.message_length_min == 10);
  CHECK(config.message_length_max == 100);
  CHECK(config.sleep_millis_min == 100);
  CHECK(config.sleep_millis_max == 3000);
  CHECK(config.paradigm == Paradigm::propose);
  CHECK(config.proposals_per_commit == 4);
  CHECK(config.invite_chance == doctest::Approx(0.4));
  CHECK(config.remove_chance == doctest::Approx(0.1));
  CHECK(config.update_chance == doctest::Approx(0.5));
  CHECK(config.replicas == 8);
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("serialization round trips")
{
  const auto config = parse_client_config(full_config);
  const auto again = parse_client_config(config.to_toml());
  CHECK(again.ds == config.ds);
  CHECK(again.groups == config.groups);
  CHECK(again.external_join == config.external_join);
  CHECK(again.auth_policy == config.auth_policy);
  CHECK(again.paradigm == config.paradigm);
  CHECK(again.proposals_per_commit == config.proposals_per_commit);
  CHECK(again.sleep_millis_max == config.sleep_millis_max);
  CHECK(again.replicas == config.replicas);
  CHECK(again.invite_chance == doctest::Approx(config.invite_chance));
}

TEST_CASE("missing required keys are reported")
{
  CHECK_THROWS_AS(parse_client_config(patched("join_chance = 0.2\n", "")),
                  MissingKey);
  CHECK_THROWS_AS(parse_client_config(patched("paradigm = \"propose\"\n", "")),
                  MissingKey);
  CHECK_THROWS_AS(parse_client_config(patched("ds = \"mqtt\"\n", "")), MissingKey);
}

TEST_CASE("unknown keys and sections are rejected")
{
  CHECK_THROWS_AS(
    parse_client_config(patched("scale = true", "scale = true\ntypo_key = 1")),
    UnknownKey);
  CHECK_THROWS_AS(parse_client_config(patched("[meta]", "[extra]\nx = 1\n[meta]")),
                  UnknownKey);
}

TEST_CASE("duplicate keys are rejected")
{
  CHECK_THROWS_AS(
    parse_client_config(patched("scale = true", "scale = true\nscale = false")),
    BadValue);
}

TEST_CASE("value validation")
{
  // chance outside [0, 1]
  CHECK_THROWS_AS(
    parse_client_config(patched("join_chance = 0.2", "join_chance = 1.5")),
    BadValue);
  // unknown enum values
  CHECK_THROWS_AS(
    parse_client_config(patched("auth_policy = \"Random\"", "auth_policy = \"Boss\"")),
    BadValue);
  CHECK_THROWS_AS(
    parse_client_config(patched("paradigm = \"propose\"", "paradigm = \"vote\"")),
    BadValue);
  // malformed number
  CHECK_THROWS_AS(
    parse_client_config(patched("message_length_min = 10", "message_length_min = ten")),
    BadValue);
}

TEST_CASE("semantic validation")
{
  // modification kind chances must sum to one
  auto config = parse_client_config(full_config);
  config.invite_chance = 0.5;
  CHECK_THROWS_AS(config.validate(), BadValue);

  config = parse_client_config(full_config);
  config.message_length_min = 200; // min above max
  CHECK_THROWS_AS(config.validate(), BadValue);

  config = parse_client_config(full_config);
  config.sleep_millis_min = 0; // virtual sleeping must advance time
  CHECK_THROWS_AS(config.validate(), BadValue);

  config = parse_client_config(full_config);
  config.ds = "carrier-pigeon";
  CHECK_THROWS_AS(config.validate(), BadValue);

  config = parse_client_config(full_config);
  config.groups = {};
  CHECK_THROWS_AS(config.validate(), BadValue);

  config = parse_client_config(full_config);
  config.groups = { "a", "a" };
  CHECK_THROWS_AS(config.validate(), BadValue);

  config = parse_client_config(full_config);
  config.proposals_per_commit = 0;
  CHECK_THROWS_AS(config.validate(), BadValue);

  // a sum within 1e-9 of one is accepted
  config = parse_client_config(full_config);
  config.invite_chance = 0.4 + 4e-10;
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("auxiliary service urls are accepted and ignored")
{
  // [http_server] and [mqtt] sections parse without affecting behavior
  const auto config = parse_client_config(full_config);
  const auto stripped = parse_client_config(
    patched("[http_server]\nurl = \"http://localhost:8080\"\n\n[mqtt]\nurl = \"tcp://localhost:1883\"\n\n", ""));
  CHECK(config.ds == stripped.ds);
  CHECK(config.replicas == stripped.replicas);
}

TEST_CASE("enum names round trip")
{
  CHECK(auth_policy_name(AuthPolicy::first) == "First");
  CHECK(auth_policy_name(AuthPolicy::last) == "Last");
  CHECK(auth_policy_name(AuthPolicy::random) == "Random");
  CHECK(auth_policy_from_name("First") == AuthPolicy::first);
  CHECK_THROWS_AS(auth_policy_from_name("first?"), BadValue);
  CHECK(paradigm_name(Paradigm::commit) == "commit");
  CHECK(paradigm_name(Paradigm::propose) == "propose");
  CHECK(paradigm_from_name("propose") == Paradigm::propose);
  CHECK_THROWS_AS(paradigm_from_name("other"), BadValue);
}

TEST_CASE("load_client_config reports missing files")
{
  CHECK_THROWS_AS(load_client_config("/nonexistent/path.toml"), OpenError);
}

TEST_SUITE_END();
