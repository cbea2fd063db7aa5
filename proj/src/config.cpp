#include <cgkasim/config.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cgkasim {

///
/// Enum names
///

static const std::string policy_names[] = { "First", "Last", "Random" };
static const std::string paradigm_names[] = { "commit", "propose" };

const std::string&
auth_policy_name(AuthPolicy policy)
{
  return policy_names[static_cast<size_t>(policy)];
}

AuthPolicy
auth_policy_from_name(const std::string& name)
{
  for (size_t i = 0; i < 3; i++) {
    if (name == policy_names[i]) {
      return static_cast<AuthPolicy>(i);
    }
  }
  throw BadValue("unknown auth_policy: " + name);
}

const std::string&
paradigm_name(Paradigm paradigm)
{
  return paradigm_names[static_cast<size_t>(paradigm)];
}

Paradigm
paradigm_from_name(const std::string& name)
{
  for (size_t i = 0; i < 2; i++) {
    if (name == paradigm_names[i]) {
      return static_cast<Paradigm>(i);
    }
  }
  throw BadValue("unknown paradigm: " + name);
}

///
/// Low-level line scanning
///

static std::string
strip(const std::string& in)
{
  auto begin = in.find_first_not_of(" \t\r");
  if (begin == std::string::npos) {
    return "";
  }
  auto end = in.find_last_not_of(" \t\r");
  return in.substr(begin, end - begin + 1);
}

// remove a trailing comment, respecting double-quoted strings
static std::string
strip_comment(const std::string& in)
{
  bool quoted = false;
  for (size_t i = 0; i < in.size(); i++) {
    if (in[i] == '"') {
      quoted = !quoted;
    } else if (in[i] == '#' && !quoted) {
      return in.substr(0, i);
    }
  }
  return in;
}

static std::string
parse_quoted(const std::string& raw, const std::string& key)
{
  if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') {
    throw BadValue(key + ": expected a quoted string, got: " + raw);
  }
  return raw.substr(1, raw.size() - 2);
}

static bool
parse_bool(const std::string& raw, const std::string& key)
{
  if (raw == "true") {
    return true;
  }
  if (raw == "false") {
    return false;
  }
  throw BadValue(key + ": expected true or false, got: " + raw);
}

static uint64_t
parse_count(const std::string& raw, const std::string& key)
{
  if (raw.empty() || raw.find_first_not_of("0123456789") != std::string::npos) {
    throw BadValue(key + ": expected a non-negative integer, got: " + raw);
  }
  try {
    return std::stoull(raw);
  } catch (const std::exception&) {
    throw BadValue(key + ": integer out of range: " + raw);
  }
}

static double
parse_chance(const std::string& raw, const std::string& key)
{
  size_t used = 0;
  double value = 0;
  try {
    value = std::stod(raw, &used);
  } catch (const std::exception&) {
    throw BadValue(key + ": expected a number, got: " + raw);
  }
  if (used != raw.size() || !std::isfinite(value)) {
    throw BadValue(key + ": expected a number, got: " + raw);
  }
  if (value < 0 || value > 1) {
    throw BadValue(key + ": probability outside [0, 1]: " + raw);
  }
  return value;
}

static std::vector<std::string>
parse_string_array(const std::string& raw, const std::string& key)
{
  if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') {
    throw BadValue(key + ": expected an array of strings, got: " + raw);
  }
  std::vector<std::string> out;
  auto body = strip(raw.substr(1, raw.size() - 2));
  while (!body.empty()) {
    auto comma = std::string::npos;
    bool quoted = false;
    for (size_t i = 0; i < body.size(); i++) {
      if (body[i] == '"') {
        quoted = !quoted;
      } else if (body[i] == ',' && !quoted) {
        comma = i;
        break;
      }
    }
    auto item = strip(comma == std::string::npos ? body : body.substr(0, comma));
    out.push_back(parse_quoted(item, key));
    body = comma == std::string::npos ? "" : strip(body.substr(comma + 1));
  }
  return out;
}

///
/// Parsing
///

ClientConfig
parse_client_config(const std::string& text)
{
  ClientConfig config;
  std::set<std::string> seen;

  std::istringstream lines(text);
  std::string raw_line;
  std::string section;
  while (std::getline(lines, raw_line)) {
    auto line = strip(strip_comment(raw_line));
    if (line.empty()) {
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw BadValue("malformed section header: " + line);
      }
      section = strip(line.substr(1, line.size() - 2));
      if (section != "cgka" && section != "paradigm" &&
          section != "http_server" && section != "mqtt" && section != "meta") {
        throw UnknownKey("unknown section: [" + section + "]");
      }
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw BadValue("expected key = value, got: " + line);
    }
    auto key = strip(line.substr(0, eq));
    auto value = strip(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw BadValue("expected key = value, got: " + line);
    }

    auto qualified = section + "." + key;
    if (!seen.insert(qualified).second) {
      throw BadValue("duplicate key: " + qualified);
    }

    if (section == "cgka") {
      if (key == "ds") {
        config.ds = parse_quoted(value, qualified);
      } else if (key == "groups") {
        config.groups = parse_string_array(value, qualified);
      } else if (key == "external_join") {
        config.external_join = parse_bool(value, qualified);
      } else if (key == "join_chance") {
        config.join_chance = parse_chance(value, qualified);
      } else if (key == "issue_update_chance") {
        config.issue_update_chance = parse_chance(value, qualified);
      } else if (key == "message_chance") {
        config.message_chance = parse_chance(value, qualified);
      } else if (key == "scale") {
        config.scale = parse_bool(value, qualified);
      } else if (key == "auth_policy") {
        config.auth_policy = auth_policy_from_name(parse_quoted(value, qualified));
      } else if (key == "message_length_min") {
        config.message_length_min = parse_count(value, qualified);
      } else if (key == "message_length_max") {
        config.message_length_max = parse_count(value, qualified);
      } else if (key == "sleep_millis_min") {
        config.sleep_millis_min = parse_count(value, qualified);
      } else if (key == "sleep_millis_max") {
        config.sleep_millis_max = parse_count(value, qualified);
      } else {
        throw UnknownKey("unknown key: " + qualified);
      }
    } else if (section == "paradigm") {
      if (key == "paradigm") {
        config.paradigm = paradigm_from_name(parse_quoted(value, qualified));
      } else if (key == "proposals_per_commit") {
        config.proposals_per_commit =
          static_cast<uint32_t>(parse_count(value, qualified));
      } else if (key == "invite_chance") {
        config.invite_chance = parse_chance(value, qualified);
      } else if (key == "remove_chance") {
        config.remove_chance = parse_chance(value, qualified);
      } else if (key == "update_chance") {
        config.update_chance = parse_chance(value, qualified);
      } else {
        throw UnknownKey("unknown key: " + qualified);
      }
    } else if (section == "http_server") {
      if (key == "url") {
        config.http_server_url = parse_quoted(value, qualified);
      } else {
        throw UnknownKey("unknown key: " + qualified);
      }
    } else if (section == "mqtt") {
      if (key == "url") {
        config.mqtt_url = parse_quoted(value, qualified);
      } else {
        throw UnknownKey("unknown key: " + qualified);
      }
    } else if (section == "meta") {
      if (key == "replicas") {
        config.replicas = static_cast<uint32_t>(parse_count(value, qualified));
      } else {
        throw UnknownKey("unknown key: " + qualified);
      }
    } else {
      throw UnknownKey("key outside any section: " + key);
    }
  }

  static const char* required[] = {
    "cgka.ds",
    "cgka.groups",
    "cgka.join_chance",
    "cgka.issue_update_chance",
    "cgka.message_chance",
    "cgka.auth_policy",
    "cgka.message_length_min",
    "cgka.message_length_max",
    "cgka.sleep_millis_min",
    "cgka.sleep_millis_max",
    "paradigm.paradigm",
    "paradigm.invite_chance",
    "paradigm.remove_chance",
    "paradigm.update_chance",
  };
  for (const auto* key : required) {
    if (seen.count(key) == 0) {
      throw MissingKey(std::string("missing required key: ") + key);
    }
  }

  config.validate();
  return config;
}

ClientConfig
load_client_config(const std::string& path)
{
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw OpenError("cannot open config file: " + path);
  }
  std::ostringstream body;
  body << file.rdbuf();
  return parse_client_config(body.str());
}

///
/// Validation and rendering
///

void
ClientConfig::validate() const
{
  if (ds != "mqtt" && ds != "gossipsub") {
    throw BadValue("cgka.ds must be \"mqtt\" or \"gossipsub\", got: " + ds);
  }
  if (groups.empty()) {
    throw BadValue("cgka.groups must name at least one group");
  }
  std::set<std::string> unique_groups;
  for (const auto& group : groups) {
    if (group.empty() || group.find(' ') != std::string::npos) {
      throw BadValue("cgka.groups entries must be non-empty, space-free names");
    }
    if (!unique_groups.insert(group).second) {
      throw BadValue("cgka.groups contains a duplicate: " + group);
    }
  }
  if (message_length_min > message_length_max) {
    throw BadValue("cgka.message_length_min exceeds message_length_max");
  }
  if (message_length_max == 0) {
    throw BadValue("cgka.message_length_max must be positive");
  }
  if (sleep_millis_min > sleep_millis_max) {
    throw BadValue("cgka.sleep_millis_min exceeds sleep_millis_max");
  }
  if (sleep_millis_min == 0) {
    throw BadValue("cgka.sleep_millis_min must be positive");
  }
  if (proposals_per_commit < 1) {
    throw BadValue("paradigm.proposals_per_commit must be at least 1");
  }
  auto kind_sum = invite_chance + remove_chance + update_chance;
  if (std::abs(kind_sum - 1.0) > 1e-9) {
    throw BadValue("paradigm.{invite,remove,update}_chance must sum to 1");
  }
  if (replicas < 1) {
    throw BadValue("meta.replicas must be at least 1");
  }
}

static std::string
render_chance(double value)
{
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

std::string
ClientConfig::to_toml() const
{
  std::ostringstream out;
  out << "[cgka]\n";
  out << "ds = \"" << ds << "\"\n";
  out << "groups = [";
  for (size_t i = 0; i < groups.size(); i++) {
    out << (i == 0 ? "" : ", ") << '"' << groups[i] << '"';
  }
  out << "]\n";
  out << "external_join = " << (external_join ? "true" : "false") << "\n";
  out << "join_chance = " << render_chance(join_chance) << "\n";
  out << "issue_update_chance = " << render_chance(issue_update_chance) << "\n";
  out << "message_chance = " << render_chance(message_chance) << "\n";
  out << "scale = " << (scale ? "true" : "false") << "\n";
  out << "auth_policy = \"" << auth_policy_name(auth_policy) << "\"\n";
  out << "message_length_min = " << message_length_min << "\n";
  out << "message_length_max = " << message_length_max << "\n";
  out << "sleep_millis_min = " << sleep_millis_min << "\n";
  out << "sleep_millis_max = " << sleep_millis_max << "\n";
  out << "\n[paradigm]\n";
  out << "paradigm = \"" << paradigm_name(paradigm) << "\"\n";
  out << "proposals_per_commit = " << proposals_per_commit << "\n";
  out << "invite_chance = " << render_chance(invite_chance) << "\n";
  out << "remove_chance = " << render_chance(remove_chance) << "\n";
  out << "update_chance = " << render_chance(update_chance) << "\n";
  if (!http_server_url.empty()) {
    out << "\n[http_server]\n";
    out << "url = \"" << http_server_url << "\"\n";
  }
  if (!mqtt_url.empty()) {
    out << "\n[mqtt]\n";
    out << "url = \"" << mqtt_url << "\"\n";
  }
  out << "\n[meta]\n";
  out << "replicas = " << replicas << "\n";
  return out.str();
}

} // namespace cgkasim
