#include <doctest.h>

#include <cgkasim/analysis.hpp>
#include <cgkasim/logrec.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace cgkasim;

TEST_SUITE_BEGIN("metrics");

///
/// Log records
///

TEST_CASE("log lines parse and format verbatim")
{
  const std::string invite =
    "group_1 8 User_0d4341e0c0f4 Invite User_b3f20ed42c2a 1065 1739176120380282661 5885";
  const std::string process =
    "group_1 8 User_d13041578e84 Process User_0d4341e0c0f4 1739176120384444036 8599";
  const std::string welcome =
    "group_1 8 User_b3f20ed42c2a Welcome User_0d4341e0c0f4 2755 1739176120461981624 1823";

  const auto a = LogRecord::parse(invite);
  CHECK(a.group == "group_1");
  CHECK(a.group_size == 8);
  CHECK(a.actor == "User_0d4341e0c0f4");
  CHECK(a.action == Action::invite);
  CHECK(a.counterpart == "User_b3f20ed42c2a");
  CHECK(a.size_bytes == 1065);
  CHECK(a.timestamp_ns == 1739176120380282661ULL);
  CHECK(a.cost_us == 5885);
  CHECK(a.format() == invite);

  const auto b = LogRecord::parse(process);
  CHECK(b.action == Action::process);
  CHECK_FALSE(b.size_bytes.has_value()); // processing has no wire size
  CHECK(b.counterpart == "User_0d4341e0c0f4"); // the committer
  CHECK(b.format() == process);

  const auto c = LogRecord::parse(welcome);
  CHECK(c.action == Action::welcome);
  CHECK(c.size_bytes == 2755);
  CHECK(c.format() == welcome);
}

TEST_CASE("every action token round trips")
{
  for (const auto* name : { "Invite", "Remove", "Update", "Join", "Propose",
                            "Process", "Welcome", "GroupInfo", "Message" }) {
    const auto action = action_from_name(name);
    CHECK(action_name(action) == name);
  }
  CHECK_THROWS_AS(action_from_name("Send"), BadLine);
}

TEST_CASE("malformed lines are rejected with BadLine")
{
  // too few fields
  CHECK_THROWS_AS(LogRecord::parse("g 1 a Invite b 10 5"), BadLine);
  // too many fields
  CHECK_THROWS_AS(LogRecord::parse("g 1 a Invite b 10 5 6 7"), BadLine);
  // unknown action
  CHECK_THROWS_AS(LogRecord::parse("g 1 a Shout b 10 5 6"), BadLine);
  // non-numeric group size
  CHECK_THROWS_AS(LogRecord::parse("g x a Invite b 10 5 6"), BadLine);
  // non-numeric cost
  CHECK_THROWS_AS(LogRecord::parse("g 1 a Invite b 10 5 cheap"), BadLine);
  // Process must not carry a size field (8 fields)
  CHECK_THROWS_AS(LogRecord::parse("g 1 a Process b 10 5 6"), BadLine);
  // non-Process actions must carry a size field (7 fields)
  CHECK_THROWS_AS(LogRecord::parse("g 1 a Invite b 5 6"), BadLine);
  // zero group size
  CHECK_THROWS_AS(LogRecord::parse("g 0 a Invite b 10 5 6"), BadLine);
}

TEST_CASE("parse errors carry one-based line numbers")
{
  const std::string text = "group_1 2 a Message - 10 100 5\n"
                           "group_1 2 a BadAction - 10 100 5\n";
  try {
    parse_log_text(text);
    FAIL("expected BadLine");
  } catch (const BadLine& err) {
    CHECK(std::string(err.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("blank lines and trailing CR are tolerated")
{
  const std::string text = "\ngroup_1 2 a Message - 10 100 5\r\n\n";
  const auto records = parse_log_text(text);
  REQUIRE(records.size() == 1);
  CHECK(records[0].action == Action::message);
}

TEST_CASE("log files round trip")
{
  const auto path = std::filesystem::temp_directory_path() / "cgkasim_log_rt.log";
  std::vector<LogRecord> records;
  LogRecord r;
  r.group = "g";
  r.group_size = 3;
  r.actor = "a";
  r.action = Action::update;
  r.size_bytes = 123;
  r.timestamp_ns = 1000;
  r.cost_us = 17;
  records.push_back(r);
  r.action = Action::process;
  r.size_bytes.reset();
  r.counterpart = "a";
  records.push_back(r);

  write_log_file(path.string(), records);
  const auto back = read_log_file(path.string());
  REQUIRE(back.size() == 2);
  CHECK(back[0].format() == records[0].format());
  CHECK(back[1].format() == records[1].format());
  std::filesystem::remove(path);

  CHECK_THROWS_AS(read_log_file("/nonexistent/file.log"), OpenError);
}

TEST_CASE("log sink invokes its hook and hands over records")
{
  LogSink sink;
  size_t seen = 0;
  sink.set_hook([&](const LogRecord&) { seen++; });
  LogRecord r;
  r.group = "g";
  r.actor = "a";
  r.action = Action::message;
  r.size_bytes = 1;
  sink.append(r);
  sink.append(r);
  CHECK(seen == 2);
  CHECK(sink.records().size() == 2);
  const auto taken = sink.take();
  CHECK(taken.size() == 2);
  CHECK(sink.records().empty());
}

///
/// Latency pairing
///

namespace {

LogRecord
rec(const std::string& group, uint64_t gs, const std::string& actor, Action action,
    const std::string& counterpart, uint64_t ts)
{
  LogRecord r;
  r.group = group;
  r.group_size = static_cast<uint32_t>(gs);
  r.actor = actor;
  r.action = action;
  r.counterpart = counterpart;
  if (action != Action::process) {
    r.size_bytes = 100;
  }
  r.timestamp_ns = ts;
  r.cost_us = 1;
  return r;
}

} // namespace

TEST_CASE("latency pairs processing against the matching commit")
{
  std::vector<LogRecord> records;
  records.push_back(rec("g", 4, "alice", Action::update, "-", 100));
  records.push_back(rec("g", 4, "bob", Action::process, "alice", 110));
  records.push_back(rec("g", 4, "carol", Action::process, "alice", 120));
  records.push_back(rec("g", 4, "dave", Action::process, "alice", 130));

  const auto report = compute_latency(records);
  REQUIRE(report.samples.size() == 1);
  CHECK(report.orphan_processes == 0);
  const auto& sample = report.samples[0];
  CHECK(sample.committer == "alice");
  CHECK(sample.group_size == 4);
  CHECK(sample.has_latency());
  CHECK(sample.mean_latency_ns() == doctest::Approx(20.0));
  CHECK(sample.max_latency_ns() == 30);
}

TEST_CASE("a new commit closes the previous window")
{
  std::vector<LogRecord> records;
  records.push_back(rec("g", 4, "alice", Action::update, "-", 100));
  records.push_back(rec("g", 4, "bob", Action::process, "alice", 110));
  records.push_back(rec("g", 5, "bob", Action::invite, "zed", 200));
  records.push_back(rec("g", 5, "alice", Action::process, "bob", 215));
  // late record for the FIRST commit arrives after the second window opened:
  // its window is closed, so it no longer attaches
  records.push_back(rec("g", 4, "carol", Action::process, "alice", 220));

  const auto report = compute_latency(records);
  REQUIRE(report.samples.size() == 2);
  CHECK(report.samples[0].mean_latency_ns() == doctest::Approx(10.0));
  CHECK(report.samples[1].mean_latency_ns() == doctest::Approx(15.0));
  CHECK(report.orphan_processes == 1);
}

TEST_CASE("processing before any commit is an orphan, not an error")
{
  std::vector<LogRecord> records;
  records.push_back(rec("g", 4, "bob", Action::process, "ghost", 50));
  records.push_back(rec("g", 4, "alice", Action::update, "-", 100));
  const auto report = compute_latency(records);
  CHECK(report.orphan_processes == 1);
  REQUIRE(report.samples.size() == 1);
  CHECK_FALSE(report.samples[0].has_latency());
}

TEST_CASE("a commit no one processed yields an empty sample")
{
  std::vector<LogRecord> records;
  records.push_back(rec("g", 2, "alice", Action::update, "-", 100));
  const auto report = compute_latency(records);
  REQUIRE(report.samples.size() == 1);
  CHECK_FALSE(report.samples[0].has_latency());
  CHECK_THROWS_AS(report.samples[0].mean_latency_ns(), DegenerateSeries);
  CHECK_THROWS_AS(report.samples[0].max_latency_ns(), DegenerateSeries);
}

TEST_CASE("groups are paired independently and out-of-order input is sorted")
{
  std::vector<LogRecord> records;
  records.push_back(rec("g2", 3, "bob", Action::process, "alice", 150));
  records.push_back(rec("g1", 2, "alice", Action::update, "-", 100));
  records.push_back(rec("g2", 3, "alice", Action::update, "-", 120));
  records.push_back(rec("g1", 2, "bob", Action::process, "alice", 140));

  const auto report = compute_latency(records);
  REQUIRE(report.samples.size() == 2);
  // sample order follows group name, then time
  CHECK(report.samples[0].group == "g1");
  CHECK(report.samples[0].mean_latency_ns() == doctest::Approx(40.0));
  CHECK(report.samples[1].group == "g2");
  CHECK(report.samples[1].mean_latency_ns() == doctest::Approx(30.0));
}

///
/// Per-modification averaging
///

TEST_CASE("auc averages a commit and its proposals over the modifications")
{
  CHECK(auc(1000.0, { 100.0, 100.0, 100.0, 100.0 }, 4) == doctest::Approx(350.0));
  CHECK(auc(1065.0, {}, 1) == doctest::Approx(1065.0));
  CHECK(auc(900.0, {}, 3) == doctest::Approx(300.0));
  CHECK_THROWS_AS(auc(1.0, { 1.0 }, 2), BadArity);   // cp neither empty nor n
  CHECK_THROWS_AS(auc(1.0, {}, 0), BadArity);        // n must be at least 1
  CHECK_THROWS_AS(auc(1.0, { 1.0, 1.0, 1.0 }, 2), BadArity);
}

TEST_CASE("commit windows batch proposals and attach processing costs")
{
  std::vector<LogRecord> records;
  auto propose = rec("g", 4, "alice", Action::propose, "x", 10);
  propose.cost_us = 100;
  records.push_back(propose);
  auto propose2 = rec("g", 4, "bob", Action::propose, "y", 20);
  propose2.cost_us = 200;
  records.push_back(propose2);
  auto commit = rec("g", 4, "alice", Action::invite, "x", 30);
  commit.cost_us = 1000;
  records.push_back(commit);
  auto process = rec("g", 4, "bob", Action::process, "alice", 40);
  process.cost_us = 500;
  records.push_back(process);
  auto unrelated = rec("g", 4, "carol", Action::process, "nobody", 45);
  records.push_back(unrelated);

  const auto windows = commit_windows(records);
  REQUIRE(windows.size() == 1);
  const auto& w = windows[0];
  CHECK(w.committer == "alice");
  CHECK(w.modifications == 2);
  CHECK(w.proposal_costs == std::vector<double>{ 100.0, 200.0 });
  CHECK(w.process_costs == std::vector<double>{ 500.0 });
  CHECK(auc(w.commit_cost, w.proposal_costs, w.modifications) ==
        doctest::Approx((1000.0 + 300.0) / 2));
}

TEST_CASE("a lone commit forms a single-modification window")
{
  std::vector<LogRecord> records;
  records.push_back(rec("g", 4, "alice", Action::update, "-", 30));
  const auto windows = commit_windows(records);
  REQUIRE(windows.size() == 1);
  CHECK(windows[0].modifications == 1);
  CHECK(windows[0].proposal_costs.empty());
}

///
/// Aggregation and fitting
///

TEST_CASE("aggregate buckets by x and averages, ascending, empties omitted")
{
  const std::vector<std::pair<uint64_t, double>> samples = {
    { 8, 10.0 }, { 2, 1.0 }, { 2, 3.0 }, { 8, 20.0 }, { 8, 30.0 },
  };
  const auto series = aggregate(samples);
  REQUIRE(series.size() == 2); // bucket 5 never appears
  CHECK(series[0].x == 2.0);
  CHECK(series[0].y == doctest::Approx(2.0));
  CHECK(series[1].x == 8.0);
  CHECK(series[1].y == doctest::Approx(20.0));
  CHECK(aggregate({}).empty());
}

TEST_CASE("linear fit recovers an exact line")
{
  Series series;
  for (uint64_t x = 1; x <= 6; x++) {
    series.push_back({ static_cast<double>(x), 2.0 * static_cast<double>(x) + 1.0 });
  }
  const auto result = fit(series, FitModel::linear);
  CHECK(result.slope == doctest::Approx(2.0));
  CHECK(result.intercept == doctest::Approx(1.0));
  CHECK(result.r_squared == doctest::Approx(1.0));
}

TEST_CASE("logarithmic fit recovers an exact log curve and beats the line")
{
  Series series;
  for (uint64_t x = 2; x <= 64; x *= 2) {
    series.push_back(
      { static_cast<double>(x), 3.0 * std::log(static_cast<double>(x)) + 2.0 });
  }
  const auto log_fit = fit(series, FitModel::logarithmic);
  CHECK(log_fit.slope == doctest::Approx(3.0));
  CHECK(log_fit.intercept == doctest::Approx(2.0));
  CHECK(log_fit.r_squared == doctest::Approx(1.0));

  const auto linear_fit = fit(series, FitModel::linear);
  CHECK(log_fit.r_squared > linear_fit.r_squared);
}

TEST_CASE("a linear series beats the logarithmic model on r-squared")
{
  Series series;
  for (uint64_t x = 1; x <= 32; x += 3) {
    series.push_back({ static_cast<double>(x), 5.0 * static_cast<double>(x) });
  }
  const auto linear_fit = fit(series, FitModel::linear);
  const auto log_fit = fit(series, FitModel::logarithmic);
  CHECK(linear_fit.r_squared > log_fit.r_squared);
}

TEST_CASE("degenerate series are rejected")
{
  Series two = { { 1.0, 1.0 }, { 2.0, 2.0 } };
  CHECK_THROWS_AS(fit(two, FitModel::linear), DegenerateSeries);

  Series constant_x = { { 3.0, 1.0 }, { 3.0, 2.0 }, { 3.0, 3.0 } };
  CHECK_THROWS_AS(fit(constant_x, FitModel::linear), DegenerateSeries);

  Series nonpositive = { { 0.0, 1.0 }, { 2.0, 2.0 }, { 4.0, 3.0 } };
  CHECK_THROWS_AS(fit(nonpositive, FitModel::logarithmic), DegenerateSeries);
}

TEST_CASE("constant y across varying x fits with zero slope")
{
  Series series = { { 1.0, 7.0 }, { 2.0, 7.0 }, { 3.0, 7.0 } };
  const auto result = fit(series, FitModel::linear);
  CHECK(result.slope == doctest::Approx(0.0));
  CHECK(result.intercept == doctest::Approx(7.0));
  CHECK(result.r_squared == doctest::Approx(1.0)); // zero residual on zero variance
}

///
/// Exports
///

TEST_CASE("csv export writes the pinned header and round trips")
{
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = (dir / "cgkasim_series.csv").string();
  Series series = { { 2.0, 1.5 }, { 8.0, 3.25 } };
  export_csv(series, "mean_latency_ms", path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "group_size,mean_latency_ms");
  std::string row;
  std::getline(in, row);
  CHECK(row == "2,1.5");
  in.close();

  std::string name;
  const auto back = import_csv(path, &name);
  CHECK(name == "mean_latency_ms");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == series[0]);
  CHECK(back[1] == series[1]);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(export_csv(series, "bad name", path), InvalidParameterError);
}

TEST_CASE("plot data export writes x y rows")
{
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = (dir / "cgkasim_series.dat").string();
  Series series = { { 2.0, 1.5 }, { 8.0, 3.0 } };
  export_plotdata(series, path);
  std::ifstream in(path);
  std::string row;
  std::getline(in, row);
  CHECK(row == "2 1.5");
  std::getline(in, row);
  CHECK(row == "8 3");
  in.close();
  std::filesystem::remove(path);
}

TEST_SUITE_END();
