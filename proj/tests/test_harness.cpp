#include <doctest.h>

#include <cgkasim/scenario.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace cgkasim;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("harness");

namespace {

ClientConfig
growth_config()
{
  ClientConfig config;
  config.ds = "mqtt";
  config.groups = { "g" };
  config.external_join = false;
  config.join_chance = 0.0;
  config.issue_update_chance = 1.0;
  config.message_chance = 0.0;
  config.scale = false;
  config.auth_policy = AuthPolicy::first;
  config.message_length_min = 10;
  config.message_length_max = 100;
  config.sleep_millis_min = 100;
  config.sleep_millis_max = 1000;
  config.paradigm = Paradigm::commit;
  config.proposals_per_commit = 1;
  config.invite_chance = 1.0;
  config.remove_chance = 0.0;
  config.update_chance = 0.0;
  config.replicas = 6;
  return config;
}

ScenarioSpec
growth_spec(uint64_t seed, uint32_t target)
{
  ScenarioSpec spec;
  spec.config = growth_config();
  spec.seed = seed;
  spec.target_size = target;
  spec.provider_name = "mock";
  spec.cost_source = CostSource::zero;
  return spec;
}

fs::path
scratch_root()
{
  static const fs::path root = [] {
    auto dir = fs::temp_directory_path() /
               ("cgkasim_harness_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
  }();
  return root;
}

// two persisted runs shared by the analyze/compare cases: one per paradigm
struct TwoRuns
{
  std::string dir_a; // commit paradigm, first policy
  std::string dir_b; // propose paradigm, two proposals per commit
};

const TwoRuns&
shared_runs()
{
  static const TwoRuns runs = [] {
    TwoRuns r;
    auto spec_a = growth_spec(7, 6);
    r.dir_a = (scratch_root() / "runA").string();
    fs::remove_all(r.dir_a);
    run_to_directory(spec_a, r.dir_a);

    auto spec_b = growth_spec(21, 6);
    spec_b.config.paradigm = Paradigm::propose;
    spec_b.config.proposals_per_commit = 2;
    spec_b.config.auth_policy = AuthPolicy::random;
    // pure invite batches starve once a single candidate remains (the second
    // proposal slot can never fill), so keep update proposals in the mix
    spec_b.config.invite_chance = 0.5;
    spec_b.config.update_chance = 0.5;
    r.dir_b = (scratch_root() / "runB").string();
    fs::remove_all(r.dir_b);
    run_to_directory(spec_b, r.dir_b);
    return r;
  }();
  return runs;
}

std::string
slurp(const fs::path& path)
{
  std::ifstream file(path, std::ios::binary);
  REQUIRE(file.good());
  std::ostringstream text;
  text << file.rdbuf();
  return text.str();
}

std::vector<std::string>
formatted(const std::vector<LogRecord>& records)
{
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& record : records) {
    lines.push_back(record.format());
  }
  return lines;
}

// a directory that parses as a run: a manifest and one update-commit record
std::string
synthetic_run(const std::string& name, uint64_t group_size)
{
  auto dir = scratch_root() / name;
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
  manifest << "format=cgkasim-run-v1\n"
           << "paradigm=commit\n"
           << "proposals_per_commit=1\n";
  manifest.close();

  LogRecord record;
  record.group = "g";
  record.group_size = group_size;
  record.actor = "User_aaaaaaaaaaaa";
  record.action = Action::update;
  record.counterpart = "-";
  record.size_bytes = 100;
  record.timestamp_ns = 1000;
  record.cost_us = 50;
  write_log_file((dir / "events.log").string(), { record });
  return dir.string();
}

} // namespace

TEST_CASE("a scenario needs exactly one termination condition")
{
  auto spec = growth_spec(1, 4);

  SUBCASE("target mode is accepted")
  {
    CHECK_NOTHROW(spec.validate());
  }
  SUBCASE("duration mode is accepted")
  {
    spec.target_size.reset();
    spec.duration_ms = 1000;
    CHECK_NOTHROW(spec.validate());
  }
  SUBCASE("neither is rejected")
  {
    spec.target_size.reset();
    CHECK_THROWS_AS(spec.validate(), BadValue);
  }
  SUBCASE("both are rejected")
  {
    spec.duration_ms = 1000;
    CHECK_THROWS_AS(spec.validate(), BadValue);
  }
  SUBCASE("a target below two members is rejected")
  {
    spec.target_size = 1;
    CHECK_THROWS_AS(spec.validate(), BadValue);
  }
  SUBCASE("a zero duration is rejected")
  {
    spec.target_size.reset();
    spec.duration_ms = 0;
    CHECK_THROWS_AS(spec.validate(), BadValue);
  }
  SUBCASE("the effective config reflects command-line overrides")
  {
    spec.replicas_override = 12;
    spec.ds_override = "gossipsub";
    spec.policy_override = AuthPolicy::last;
    spec.paradigm_override = Paradigm::propose;
    spec.proposals_per_commit_override = 4;
    const auto effective = spec.effective_config();
    CHECK(effective.replicas == 12);
    CHECK(effective.ds == "gossipsub");
    CHECK(effective.auth_policy == AuthPolicy::last);
    CHECK(effective.paradigm == Paradigm::propose);
    CHECK(effective.proposals_per_commit == 4);
    // the underlying config is untouched
    CHECK(spec.config.replicas == 6);
  }
}

TEST_CASE("metric extraction names series by record role")
{
  auto make = [](uint64_t group_size, const std::string& actor, Action action,
                 const std::string& counterpart, std::optional<uint64_t> size,
                 uint64_t ts, uint64_t cost) {
    LogRecord record;
    record.group = "g";
    record.group_size = group_size;
    record.actor = actor;
    record.action = action;
    record.counterpart = counterpart;
    record.size_bytes = size;
    record.timestamp_ns = ts;
    record.cost_us = cost;
    return record;
  };

  const std::vector<LogRecord> records = {
    make(1, "A", Action::group_info, "-", 100, 0, 10),
    make(1, "A", Action::invite, "B", 500, 10'000'000, 50),
    make(1, "B", Action::welcome, "A", 800, 20'000'000, 30),
    make(2, "A", Action::update, "-", 300, 100'000'000, 60),
    make(2, "B", Action::process, "A", std::nullopt, 110'000'000, 20),
    make(2, "B", Action::message, "-", 64, 150'000'000, 5),
  };

  const auto samples = metric_samples(records);

  using Samples = std::vector<std::pair<uint64_t, double>>;
  CHECK(samples.at("groupinfo_size_bytes") == Samples{ { 1, 100.0 } });
  CHECK(samples.at("commit_gen_cost_us") == Samples{ { 1, 50.0 }, { 2, 60.0 } });
  CHECK(samples.at("commit_size_bytes") == Samples{ { 1, 500.0 }, { 2, 300.0 } });
  CHECK(samples.at("invite_commit_gen_cost_us") == Samples{ { 1, 50.0 } });
  CHECK(samples.at("welcome_size_bytes") == Samples{ { 1, 800.0 } });
  CHECK(samples.at("welcome_processing_cost_us") == Samples{ { 1, 30.0 } });
  CHECK(samples.at("commit_processing_cost_us") == Samples{ { 2, 20.0 } });
  CHECK(samples.at("message_size_bytes") == Samples{ { 2, 64.0 } });
  // the update commit is processed 10 ms after generation
  CHECK(samples.at("mean_latency_ms") == Samples{ { 2, 10.0 } });
  CHECK(samples.at("max_latency_ms") == Samples{ { 2, 10.0 } });
  // lone commits count as one modification each
  CHECK(samples.at("auc_gen_cost_us") == Samples{ { 1, 50.0 }, { 2, 60.0 } });
  CHECK(samples.at("auc_processing_cost_us") == Samples{ { 2, 20.0 } });
  CHECK(samples.count("external_join_gen_cost_us") == 0);
  CHECK(samples.count("proposal_size_bytes") == 0);
}

TEST_CASE("a growth run reaches the requested size and replays bit for bit")
{
  const auto spec = growth_spec(5, 8);
  // growth_config uses six replicas; eight members need eight clients
  auto sized = spec;
  sized.config.replicas = 8;

  const auto result = run_scenario(sized);
  CHECK(result.target_reached);
  CHECK(result.final_max_group == 8);
  REQUIRE(result.user_ids.size() == 8);

  for (const auto& id : result.user_ids) {
    REQUIRE(id.size() == 17);
    CHECK(id.rfind("User_", 0) == 0);
    for (size_t i = 5; i < id.size(); i++) {
      const bool hex = (id[i] >= '0' && id[i] <= '9') || (id[i] >= 'a' && id[i] <= 'f');
      CHECK(hex);
    }
  }

  REQUIRE_FALSE(result.records.empty());
  CHECK(result.records[0].action == Action::group_info);
  const auto creator = result.records[0].actor;

  uint64_t invites = 0;
  for (size_t i = 0; i < result.records.size(); i++) {
    const auto& record = result.records[i];
    if (i > 0) {
      CHECK(record.timestamp_ns >= result.records[i - 1].timestamp_ns);
    }
    if (record.action == Action::invite) {
      invites++;
      CHECK(record.actor == creator); // first policy
    }
  }
  // seven members were added one commit at a time
  CHECK(invites == 7);
  CHECK(result.totals.malformed_payloads == 0);
  CHECK(result.totals.orphan_welcomes == 0);

  const auto replay = run_scenario(sized);
  CHECK(formatted(replay.records) == formatted(result.records));

  auto reseeded = sized;
  reseeded.seed = 6;
  const auto other = run_scenario(reseeded);
  CHECK(formatted(other.records) != formatted(result.records));
}

TEST_CASE("a duration run stops at the virtual horizon")
{
  ScenarioSpec spec;
  spec.config = growth_config();
  spec.config.replicas = 3;
  spec.config.message_chance = 0.5;
  spec.seed = 3;
  spec.duration_ms = 30000;
  spec.provider_name = "mock";
  spec.cost_source = CostSource::zero;

  const auto result = run_scenario(spec);
  CHECK(result.ended_at == ms_to_ns(30000));
  CHECK_FALSE(result.target_reached);
  CHECK_FALSE(result.records.empty());
  for (const auto& record : result.records) {
    CHECK(record.timestamp_ns <= ms_to_ns(30000));
  }
}

TEST_CASE("an unreachable target aborts at the safety horizon")
{
  ScenarioSpec spec;
  spec.config = growth_config();
  spec.config.replicas = 2;
  spec.config.issue_update_chance = 0.0; // nobody ever modifies
  spec.config.sleep_millis_min = 1000;
  spec.config.sleep_millis_max = 3000;
  spec.seed = 9;
  spec.target_size = 2;
  spec.provider_name = "mock";
  spec.cost_source = CostSource::zero;

  CHECK_THROWS_WITH_AS(run_scenario(spec),
                       doctest::Contains("not reached"),
                       DeadlockError);
}

TEST_CASE("run directories persist a replayable set of artifacts")
{
  const auto dir = scratch_root() / "persisted";
  const auto spec = growth_spec(13, 4);
  auto sized = spec;
  sized.config.replicas = 4;

  const auto result = run_to_directory(sized, dir.string());
  CHECK(fs::exists(dir / "events.log"));
  CHECK(fs::exists(dir / "manifest.txt"));
  CHECK(fs::exists(dir / "config.toml"));

  // the log on disk is the returned record set
  const auto reread = read_log_file((dir / "events.log").string());
  CHECK(reread == result.records);

  // the config round-trips through its own renderer
  const auto config = load_client_config((dir / "config.toml").string());
  CHECK_NOTHROW(config.validate());
  CHECK(config.replicas == 4);
  CHECK(config.ds == "mqtt");
  CHECK(config.auth_policy == AuthPolicy::first);

  const auto run = load_run(dir.string());
  CHECK(run.label == "persisted");
  CHECK(run.records == result.records);
  CHECK(run.manifest.at("format") == "cgkasim-run-v1");
  CHECK(run.manifest.at("seed") == "13");
  CHECK(run.manifest.at("replicas") == "4");
  CHECK(run.manifest.at("ds") == "mqtt");
  CHECK(run.manifest.at("policy") == "First");
  CHECK(run.manifest.at("paradigm") == "commit");
  CHECK(run.manifest.at("proposals_per_commit") == "1");
  CHECK(run.manifest.at("provider") == "mock");
  CHECK(run.manifest.at("cost_source") == "zero");
  CHECK(run.manifest.at("target_size") == "4");
  CHECK(run.manifest.at("records") == std::to_string(result.records.size()));
  CHECK(run.manifest.at("final_max_group") == "4");
  CHECK(run.manifest.count("version") == 1);

  // a directory that already holds a run is refused, and left untouched
  CHECK_THROWS_WITH_AS(run_to_directory(sized, dir.string()),
                       doctest::Contains("already holds a run"),
                       IoError);
  CHECK(read_log_file((dir / "events.log").string()) == result.records);
}

TEST_CASE("run labels come from the directory name, sanitized for csv")
{
  const auto dir = scratch_root() / "mixed run";
  run_to_directory(growth_spec(17, 3), dir.string());
  const auto run = load_run(dir.string());
  CHECK(run.label == "mixed_run");
}

TEST_CASE("analyze writes per-metric series, paradigm-tagged auc files and fits")
{
  const auto& runs = shared_runs();
  const auto report = scratch_root() / "report";
  analyze_runs({ runs.dir_a, runs.dir_b }, report.string());

  for (const auto* name : { "mean_latency_ms", "max_latency_ms",
                            "commit_gen_cost_us", "commit_size_bytes",
                            "commit_processing_cost_us", "welcome_size_bytes",
                            "commit_welcome_cost_us",
                            "auc_gen_cost_us_commit_ppc1",
                            "auc_gen_cost_us_propose_ppc2",
                            "auc_size_bytes_commit_ppc1",
                            "auc_size_bytes_propose_ppc2" }) {
    CHECK_MESSAGE(fs::exists(report / (std::string(name) + ".csv")), name);
    CHECK_MESSAGE(fs::exists(report / (std::string(name) + ".dat")), name);
  }

  std::string name;
  const auto series =
    import_csv((report / "commit_gen_cost_us.csv").string(), &name);
  CHECK(name == "commit_gen_cost_us");
  REQUIRE(series.size() >= 3);
  for (size_t i = 1; i < series.size(); i++) {
    CHECK(series[i].x > series[i - 1].x);
  }

  // the propose run batches two modifications per commit, so its per-update
  // generation cost sits below the lone-commit series at shared sizes
  std::string other_name;
  const auto commit_auc =
    import_csv((report / "auc_gen_cost_us_commit_ppc1.csv").string(), &other_name);
  CHECK(other_name == "auc_gen_cost_us_commit_ppc1");
  CHECK_FALSE(commit_auc.empty());

  const auto fits = slurp(report / "fits.txt");
  CHECK(fits.find("commit_gen_cost_us linear") != std::string::npos);
  CHECK(fits.find("commit_gen_cost_us logarithmic") != std::string::npos);
  CHECK(fits.find("slope=") != std::string::npos);
  CHECK(fits.find("r2=") != std::string::npos);

  // plot data rows are whitespace-separated x y pairs
  const auto dat = slurp(report / "commit_gen_cost_us.dat");
  CHECK(dat.find(',') == std::string::npos);
  CHECK_FALSE(dat.empty());
}

TEST_CASE("analyze rejects unusable inputs before writing anything")
{
  const auto report = scratch_root() / "broken-report";

  CHECK_THROWS_AS(analyze_runs({}, report.string()), InvalidParameterError);

  // a directory that is not a run: no manifest
  const auto empty_dir = scratch_root() / "not-a-run";
  fs::create_directories(empty_dir);
  CHECK_THROWS_WITH_AS(analyze_runs({ empty_dir.string() }, report.string()),
                       doctest::Contains("manifest"),
                       OpenError);
  CHECK_FALSE(fs::exists(report));

  // runs that parse but hold no records cannot be analyzed
  const auto hollow = scratch_root() / "hollow";
  fs::create_directories(hollow);
  std::ofstream(hollow / "manifest.txt") << "format=cgkasim-run-v1\n";
  std::ofstream(hollow / "events.log").close();
  CHECK_THROWS_WITH_AS(analyze_runs({ hollow.string() }, report.string()),
                       doctest::Contains("no log records"),
                       IoError);
  CHECK_FALSE(fs::exists(report));
}

TEST_CASE("compare aligns shared buckets under one labeled column per run")
{
  const auto& runs = shared_runs();
  const auto out = scratch_root() / "cmp";
  compare_runs({ runs.dir_a, runs.dir_b }, out.string());

  const auto csv = slurp(out / "compare_commit_gen_cost_us.csv");
  CHECK(csv.rfind("group_size,runA,runB\n", 0) == 0);

  // every data row is bucket,valueA,valueB with integral ascending buckets
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line); // header
  uint64_t rows = 0;
  uint64_t last_bucket = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) {
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    uint64_t bucket = 0;
    double a = 0;
    double b = 0;
    REQUIRE(static_cast<bool>(fields >> bucket >> a >> b));
    CHECK(bucket > last_bucket);
    last_bucket = bucket;
    rows++;
  }
  CHECK(rows >= 1);

  CHECK(fs::exists(out / "compare_commit_gen_cost_us.runA.dat"));
  CHECK(fs::exists(out / "compare_commit_gen_cost_us.runB.dat"));
  CHECK(fs::exists(out / "compare_mean_latency_ms.csv"));
}

TEST_CASE("compare refuses single runs and bucket-disjoint runs")
{
  const auto& runs = shared_runs();
  const auto out = scratch_root() / "cmp-bad";

  CHECK_THROWS_AS(compare_runs({ runs.dir_a }, out.string()), IncompatibleRuns);

  const auto iso_a = synthetic_run("iso2", 2);
  const auto iso_b = synthetic_run("iso9", 9);
  CHECK_THROWS_WITH_AS(compare_runs({ iso_a, iso_b }, out.string()),
                       doctest::Contains("no comparable"),
                       IncompatibleRuns);
  CHECK_FALSE(fs::exists(out));
}

TEST_SUITE_END();
