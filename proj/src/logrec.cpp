#include <cgkasim/logrec.hpp>

#include <fstream>
#include <sstream>

namespace cgkasim {

///
/// Action names
///

static const std::string names[] = {
  "Invite", "Remove",  "Update",    "Join",    "Propose",
  "Process", "Welcome", "GroupInfo", "Message",
};

const std::string&
action_name(Action action)
{
  return names[static_cast<size_t>(action)];
}

Action
action_from_name(const std::string& name)
{
  for (size_t i = 0; i < 9; i++) {
    if (name == names[i]) {
      return static_cast<Action>(i);
    }
  }
  throw BadLine("unknown action: " + name);
}

bool
is_commit_action(Action action)
{
  switch (action) {
    case Action::invite:
    case Action::remove:
    case Action::update:
    case Action::join:
      return true;
    default:
      return false;
  }
}

///
/// Formatting and parsing
///

static void
check_identifier(const std::string& field, const char* what)
{
  if (field.empty() || field.find(' ') != std::string::npos) {
    throw BadLine(std::string(what) + " must be a non-empty, space-free token");
  }
}

std::string
LogRecord::format() const
{
  check_identifier(group, "group");
  check_identifier(actor, "actor");
  check_identifier(counterpart, "counterpart");
  if (group_size < 1) {
    throw BadLine("group_size must be at least 1");
  }
  if (size_bytes.has_value() == (action == Action::process)) {
    throw BadLine("size field must be present exactly when action != Process");
  }

  std::ostringstream out;
  out << group << ' ' << group_size << ' ' << actor << ' '
      << action_name(action) << ' ' << counterpart << ' ';
  if (size_bytes) {
    out << *size_bytes << ' ';
  }
  out << timestamp_ns << ' ' << cost_us;
  return out.str();
}

static uint64_t
parse_u64_field(const std::string& field, const char* what)
{
  if (field.empty() || field.find_first_not_of("0123456789") != std::string::npos) {
    throw BadLine(std::string(what) + " must be a non-negative integer, got: " + field);
  }
  try {
    return std::stoull(field);
  } catch (const std::exception&) {
    throw BadLine(std::string(what) + " out of range: " + field);
  }
}

LogRecord
LogRecord::parse(const std::string& line)
{
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (in >> field) {
    fields.push_back(field);
  }

  if (fields.size() != 7 && fields.size() != 8) {
    throw BadLine("expected 7 or 8 fields, got " + std::to_string(fields.size()));
  }

  LogRecord record;
  record.group = fields[0];
  record.group_size = parse_u64_field(fields[1], "group_size");
  record.actor = fields[2];
  record.action = action_from_name(fields[3]);
  record.counterpart = fields[4];

  auto with_size = record.action != Action::process;
  if (fields.size() != (with_size ? 8u : 7u)) {
    throw BadLine("field count does not match action " + fields[3]);
  }
  size_t at = 5;
  if (with_size) {
    record.size_bytes = parse_u64_field(fields[at++], "size_bytes");
  }
  record.timestamp_ns = parse_u64_field(fields[at++], "timestamp_ns");
  record.cost_us = parse_u64_field(fields[at], "cost_us");

  if (record.group_size < 1) {
    throw BadLine("group_size must be at least 1");
  }
  return record;
}

///
/// Files
///

std::vector<LogRecord>
parse_log_text(const std::string& text)
{
  std::vector<LogRecord> records;
  std::istringstream lines(text);
  std::string line;
  size_t line_number = 0;
  while (std::getline(lines, line)) {
    line_number += 1;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    try {
      records.push_back(LogRecord::parse(line));
    } catch (const BadLine& err) {
      throw BadLine("line " + std::to_string(line_number) + ": " + err.what());
    }
  }
  return records;
}

std::vector<LogRecord>
read_log_file(const std::string& path)
{
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw OpenError("cannot open log file: " + path);
  }
  std::ostringstream body;
  body << file.rdbuf();
  try {
    return parse_log_text(body.str());
  } catch (const BadLine& err) {
    throw BadLine(path + ": " + err.what());
  }
}

void
write_log_file(const std::string& path, const std::vector<LogRecord>& records)
{
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw IoError("cannot write log file: " + path);
  }
  for (const auto& record : records) {
    file << record.format() << '\n';
  }
  if (!file) {
    throw IoError("failed writing log file: " + path);
  }
}

///
/// Sink
///

void
LogSink::append(LogRecord record)
{
  if (_hook) {
    _hook(record);
  }
  _records.push_back(std::move(record));
}

} // namespace cgkasim
