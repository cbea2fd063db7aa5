#pragma once

#include <cgkasim/errors.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace cgkasim {

///
/// Client behavior knobs, loaded from a sectioned key/value config file.
///

enum struct AuthPolicy : uint8_t
{
  first = 0,  // the group creator performs all modifications
  last = 1,   // the most recently added member performs them
  random = 2, // any member may perform them
};

enum struct Paradigm : uint8_t
{
  commit = 0,  // one modification per commit
  propose = 1, // batch proposals, commit every proposals_per_commit
};

const std::string& auth_policy_name(AuthPolicy policy);
AuthPolicy auth_policy_from_name(const std::string& name);

const std::string& paradigm_name(Paradigm paradigm);
Paradigm paradigm_from_name(const std::string& name);

struct ClientConfig
{
  // [cgka]
  std::string ds = "mqtt";
  std::vector<std::string> groups;
  bool external_join = false;
  double join_chance = 0;
  double issue_update_chance = 0;
  double message_chance = 0;
  bool scale = false;
  AuthPolicy auth_policy = AuthPolicy::random;
  uint64_t message_length_min = 0;
  uint64_t message_length_max = 0;
  uint64_t sleep_millis_min = 0;
  uint64_t sleep_millis_max = 0;

  // [paradigm]
  Paradigm paradigm = Paradigm::commit;
  uint32_t proposals_per_commit = 1;
  double invite_chance = 0;
  double remove_chance = 0;
  double update_chance = 0;

  // [http_server] / [mqtt], accepted for compatibility and ignored here
  std::string http_server_url;
  std::string mqtt_url;

  // [meta]
  uint32_t replicas = 1;

  // throws ConfigError subtypes on out-of-range or inconsistent values
  void validate() const;

  // render back to config-file syntax (used for run manifests)
  std::string to_toml() const;
};

// parse config text; unknown sections or keys are rejected
ClientConfig parse_client_config(const std::string& text);

// read and parse a config file; throws OpenError if unreadable
ClientConfig load_client_config(const std::string& path);

} // namespace cgkasim
