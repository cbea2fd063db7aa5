#pragma once

#include <cgkasim/errors.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cgkasim {

///
/// Structured event records, one per line:
///
///   group group_size actor action counterpart [size_bytes] timestamp_ns cost_us
///
/// The size field is present for every action except Process.
///

enum struct Action : uint8_t
{
  invite = 0,
  remove = 1,
  update = 2,
  join = 3,
  propose = 4,
  process = 5,
  welcome = 6,
  group_info = 7,
  message = 8,
};

const std::string& action_name(Action action);
Action action_from_name(const std::string& name);

// Invite / Remove / Update / Join records mark the generation of a commit
bool is_commit_action(Action action);

struct LogRecord
{
  std::string group;
  uint64_t group_size = 1;
  std::string actor;
  Action action = Action::process;
  std::string counterpart = "-";
  std::optional<uint64_t> size_bytes; // absent iff action == process
  uint64_t timestamp_ns = 0;
  uint64_t cost_us = 0;

  std::string format() const;              // throws BadLine on bad field shape
  static LogRecord parse(const std::string& line);

  friend bool operator==(const LogRecord& lhs, const LogRecord& rhs) = default;
};

// whole-file helpers; parse errors carry 1-based line numbers
std::vector<LogRecord> parse_log_text(const std::string& text);
std::vector<LogRecord> read_log_file(const std::string& path);
void write_log_file(const std::string& path, const std::vector<LogRecord>& records);

///
/// Append-only sink shared by all clients of a simulation.
///

class LogSink
{
public:
  using Hook = std::function<void(const LogRecord&)>;

  void append(LogRecord record);
  const std::vector<LogRecord>& records() const { return _records; }
  std::vector<LogRecord> take() { return std::move(_records); }

  // invoked on every append; used by the harness for termination checks
  void set_hook(Hook hook) { _hook = std::move(hook); }

private:
  std::vector<LogRecord> _records;
  Hook _hook;
};

} // namespace cgkasim
