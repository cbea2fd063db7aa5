#include <cgkasim/scenario.hpp>

#include <cgkasim/broker.hpp>
#include <cgkasim/gossip.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace cgkasim {

namespace fs = std::filesystem;

// link latency for the centralized broker and per-hop latency for the mesh;
// identical constants keep the topologies comparable
static constexpr double link_latency_ms = 5.0;
static constexpr VirtualTime target_mode_horizon_ns = 86'400'000'000'000; // 24h

///
/// Scenario
///

ClientConfig
ScenarioSpec::effective_config() const
{
  auto effective = config;
  if (replicas_override) {
    effective.replicas = *replicas_override;
  }
  if (ds_override) {
    effective.ds = *ds_override;
  }
  if (policy_override) {
    effective.auth_policy = *policy_override;
  }
  if (paradigm_override) {
    effective.paradigm = *paradigm_override;
  }
  if (proposals_per_commit_override) {
    effective.proposals_per_commit = *proposals_per_commit_override;
  }
  return effective;
}

void
ScenarioSpec::validate() const
{
  if (target_size.has_value() == duration_ms.has_value()) {
    throw BadValue("exactly one of target size and duration must be set");
  }
  if (target_size && *target_size < 2) {
    throw BadValue("target size must be at least 2");
  }
  if (duration_ms && *duration_ms == 0) {
    throw BadValue("duration must be positive");
  }
  effective_config().validate();
}

RunResult
run_scenario(const ScenarioSpec& spec)
{
  spec.validate();
  const auto config = spec.effective_config();
  auto provider = make_provider(spec.provider_name);

  Scheduler scheduler;
  scheduler.set_drain_is_error(true);
  scheduler.set_starvation_limit(ms_to_ns(config.sleep_millis_max));
  if (spec.duration_ms) {
    scheduler.set_horizon(ms_to_ns(*spec.duration_ms));
  } else {
    scheduler.set_horizon(target_mode_horizon_ns);
  }

  auto seed_state = spec.seed;
  const auto hub_seed = splitmix64(seed_state);
  const auto id_seed = splitmix64(seed_state);

  std::shared_ptr<DeliveryService> delivery;
  if (config.ds == "mqtt") {
    delivery = std::make_shared<BrokerDeliveryService>(
      scheduler, LatencyModel::constant(link_latency_ms), hub_seed);
  } else {
    delivery = std::make_shared<GossipDeliveryService>(
      scheduler, LatencyModel::constant(link_latency_ms), hub_seed);
  }

  DeterministicRandom id_rng(id_seed);
  std::vector<std::string> user_ids;
  std::set<std::string> unique_ids;
  while (user_ids.size() < config.replicas) {
    auto id = "User_" + to_hex(id_rng.bytes(6));
    if (unique_ids.insert(id).second) {
      user_ids.push_back(std::move(id));
    }
  }

  LogSink sink;
  RunResult result;
  if (spec.target_size) {
    sink.set_hook([&](const LogRecord& record) {
      if (record.action == Action::invite || record.action == Action::join ||
          record.action == Action::welcome) {
        if (record.group_size + 1 >= *spec.target_size) {
          result.target_reached = true;
          scheduler.request_stop();
        }
      }
    });
  }

  std::vector<std::unique_ptr<SimClient>> clients;
  clients.reserve(config.replicas);
  for (uint32_t i = 0; i < config.replicas; i++) {
    clients.push_back(std::make_unique<SimClient>(user_ids[i],
                                                  config,
                                                  provider,
                                                  delivery,
                                                  scheduler,
                                                  sink,
                                                  splitmix64(seed_state),
                                                  spec.cost_source));
  }

  const auto mean_sleep_ms = (config.sleep_millis_min + config.sleep_millis_max) / 2;
  for (uint32_t i = 0; i < config.replicas; i++) {
    const auto activation = config.scale ? ms_to_ns(mean_sleep_ms) * i : 0;
    clients[i]->start(activation);
  }

  try {
    scheduler.run();
  } catch (const DeadlockError& err) {
    throw DeadlockError(std::string("simulation stalled: ") + err.what());
  }

  if (spec.target_size && !result.target_reached) {
    uint32_t best = 0;
    for (const auto& client : clients) {
      best = std::max(best, client->largest_group());
    }
    throw DeadlockError("target group size " + std::to_string(*spec.target_size) +
                        " not reached by the safety horizon; largest group " +
                        std::to_string(best));
  }

  for (const auto& client : clients) {
    const auto& stats = client->stats();
    result.totals.commits_won += stats.commits_won;
    result.totals.lost_races += stats.lost_races;
    result.totals.desyncs += stats.desyncs;
    result.totals.stale_commits_dropped += stats.stale_commits_dropped;
    result.totals.stale_proposals_dropped += stats.stale_proposals_dropped;
    result.totals.conflicting_proposals += stats.conflicting_proposals;
    result.totals.stale_app_dropped += stats.stale_app_dropped;
    result.totals.app_open_failures += stats.app_open_failures;
    result.totals.malformed_payloads += stats.malformed_payloads;
    result.totals.orphan_welcomes += stats.orphan_welcomes;
    result.totals.failed_joins += stats.failed_joins;
    result.totals.skipped_modifications += stats.skipped_modifications;
    result.final_max_group = std::max(result.final_max_group, client->largest_group());
  }
  result.records = sink.take();
  std::stable_sort(result.records.begin(),
                   result.records.end(),
                   [](const LogRecord& lhs, const LogRecord& rhs) {
                     return lhs.timestamp_ns < rhs.timestamp_ns;
                   });
  result.user_ids = std::move(user_ids);
  result.ended_at = scheduler.now();
  return result;
}

///
/// Run directories
///

static void
write_text_file(const std::string& path, const std::string& content)
{
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw IoError("cannot write file: " + path);
  }
  file << content;
  if (!file) {
    throw IoError("failed writing file: " + path);
  }
}

RunResult
run_to_directory(const ScenarioSpec& spec, const std::string& out_dir)
{
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create run directory: " + out_dir);
  }
  if (fs::exists(fs::path(out_dir) / "events.log")) {
    throw IoError("run directory already holds a run: " + out_dir);
  }

  auto result = run_scenario(spec);
  const auto config = spec.effective_config();

  std::ostringstream manifest;
  manifest << "format=cgkasim-run-v1\n";
  manifest << "seed=" << spec.seed << "\n";
  manifest << "replicas=" << config.replicas << "\n";
  manifest << "ds=" << config.ds << "\n";
  manifest << "policy=" << auth_policy_name(config.auth_policy) << "\n";
  manifest << "paradigm=" << paradigm_name(config.paradigm) << "\n";
  manifest << "proposals_per_commit=" << config.proposals_per_commit << "\n";
  manifest << "provider=" << spec.provider_name << "\n";
  manifest << "cost_source=" << cost_source_name(spec.cost_source) << "\n";
  if (spec.target_size) {
    manifest << "target_size=" << *spec.target_size << "\n";
  }
  if (spec.duration_ms) {
    manifest << "duration_ms=" << *spec.duration_ms << "\n";
  }
  manifest << "records=" << result.records.size() << "\n";
  manifest << "final_max_group=" << result.final_max_group << "\n";
  manifest << "ended_at_ns=" << result.ended_at << "\n";
  manifest << "version=0.1.0\n";

  write_log_file((fs::path(out_dir) / "events.log").string(), result.records);
  write_text_file((fs::path(out_dir) / "manifest.txt").string(), manifest.str());
  write_text_file((fs::path(out_dir) / "config.toml").string(), config.to_toml());
  return result;
}

RunData
load_run(const std::string& run_dir)
{
  RunData run;
  auto dir = fs::path(run_dir);
  run.label = dir.filename().string();
  if (run.label.empty()) {
    run.label = dir.parent_path().filename().string();
  }
  for (auto& ch : run.label) {
    if (ch == ',' || ch == ' ') {
      ch = '_';
    }
  }

  std::ifstream manifest((dir / "manifest.txt").string(), std::ios::binary);
  if (!manifest) {
    throw OpenError("cannot open manifest: " + (dir / "manifest.txt").string());
  }
  std::string line;
  while (std::getline(manifest, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      continue;
    }
    run.manifest[line.substr(0, eq)] = line.substr(eq + 1);
  }

  run.records = read_log_file((dir / "events.log").string());
  return run;
}

///
/// Metric extraction
///

std::map<std::string, std::vector<std::pair<uint64_t, double>>>
metric_samples(const std::vector<LogRecord>& records)
{
  std::map<std::string, std::vector<std::pair<uint64_t, double>>> samples;

  const auto latency = compute_latency(records);
  for (const auto& sample : latency.samples) {
    if (!sample.has_latency()) {
      continue;
    }
    samples["mean_latency_ms"].emplace_back(sample.group_size,
                                            sample.mean_latency_ns() / 1e6);
    samples["max_latency_ms"].emplace_back(
      sample.group_size, static_cast<double>(sample.max_latency_ns()) / 1e6);
  }

  for (const auto& record : records) {
    const auto size = static_cast<double>(record.size_bytes.value_or(0));
    const auto cost = static_cast<double>(record.cost_us);
    if (is_commit_action(record.action) && record.action != Action::join) {
      samples["commit_gen_cost_us"].emplace_back(record.group_size, cost);
      samples["commit_size_bytes"].emplace_back(record.group_size, size);
      if (record.action == Action::invite) {
        samples["invite_commit_gen_cost_us"].emplace_back(record.group_size, cost);
      }
    }
    switch (record.action) {
      case Action::join:
        samples["external_join_gen_cost_us"].emplace_back(record.group_size, cost);
        samples["external_join_size_bytes"].emplace_back(record.group_size, size);
        break;
      case Action::process:
        samples["commit_processing_cost_us"].emplace_back(record.group_size, cost);
        break;
      case Action::propose:
        samples["proposal_size_bytes"].emplace_back(record.group_size, size);
        break;
      case Action::welcome:
        samples["welcome_size_bytes"].emplace_back(record.group_size, size);
        samples["welcome_processing_cost_us"].emplace_back(record.group_size, cost);
        break;
      case Action::group_info:
        samples["groupinfo_size_bytes"].emplace_back(record.group_size, size);
        break;
      case Action::message:
        samples["message_size_bytes"].emplace_back(record.group_size, size);
        break;
      default:
        break;
    }
  }

  for (const auto& window : commit_windows(records)) {
    const auto n = window.modifications;
    samples["auc_gen_cost_us"].emplace_back(
      window.group_size, auc(window.commit_cost, window.proposal_costs, n));
    samples["auc_size_bytes"].emplace_back(
      window.group_size, auc(window.commit_size, window.proposal_sizes, n));
    if (!window.process_costs.empty()) {
      double mean_process = 0;
      for (auto cost : window.process_costs) {
        mean_process += cost;
      }
      mean_process /= static_cast<double>(window.process_costs.size());
      samples["auc_processing_cost_us"].emplace_back(
        window.group_size, mean_process / static_cast<double>(n));
    }
  }

  return samples;
}

///
/// Analyze
///

static bool
is_auc_metric(const std::string& name)
{
  return name.rfind("auc_", 0) == 0;
}

static void
append_fit_lines(std::ostringstream& out, const std::string& name, const Series& series)
{
  for (auto model : { FitModel::linear, FitModel::logarithmic }) {
    const auto* label = model == FitModel::linear ? "linear" : "logarithmic";
    try {
      const auto result = fit(series, model);
      out << name << ' ' << label << " slope=" << result.slope
          << " intercept=" << result.intercept << " r2=" << result.r_squared
          << "\n";
    } catch (const DegenerateSeries&) {
      out << name << ' ' << label << " degenerate points=" << series.size()
          << "\n";
    }
  }
}

void
analyze_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir)
{
  if (run_dirs.empty()) {
    throw InvalidParameterError("analyze requires at least one run directory");
  }

  std::vector<RunData> runs;
  runs.reserve(run_dirs.size());
  size_t total_records = 0;
  for (const auto& dir : run_dirs) {
    runs.push_back(load_run(dir));
    total_records += runs.back().records.size();
  }
  if (total_records == 0) {
    throw IoError("no log records found in the given run directories");
  }

  // pooled samples for the base metrics; auc samples grouped by the runs'
  // paradigm and proposals-per-commit so each combination gets its own series
  std::map<std::string, std::vector<std::pair<uint64_t, double>>> pooled;
  for (const auto& run : runs) {
    auto samples = metric_samples(run.records);
    std::string paradigm = "commit";
    std::string ppc = "1";
    if (auto it = run.manifest.find("paradigm"); it != run.manifest.end()) {
      paradigm = it->second;
    }
    if (auto it = run.manifest.find("proposals_per_commit");
        it != run.manifest.end()) {
      ppc = it->second;
    }
    for (auto& [name, values] : samples) {
      auto key = is_auc_metric(name) ? name + "_" + paradigm + "_ppc" + ppc : name;
      auto& bucket = pooled[key];
      bucket.insert(bucket.end(), values.begin(), values.end());
    }
  }

  std::map<std::string, Series> series_by_name;
  for (const auto& [name, values] : pooled) {
    series_by_name[name] = aggregate(values);
  }

  // derived series: cost of adding a member via invitation, commit
  // generation plus the new member's welcome processing
  {
    const auto invite = series_by_name.find("invite_commit_gen_cost_us");
    const auto welcome = series_by_name.find("welcome_processing_cost_us");
    if (invite != series_by_name.end() && welcome != series_by_name.end()) {
      Series combined;
      for (const auto& lhs : invite->second) {
        for (const auto& rhs : welcome->second) {
          if (lhs.x == rhs.x) {
            combined.push_back({ lhs.x, lhs.y + rhs.y });
          }
        }
      }
      if (!combined.empty()) {
        series_by_name["commit_welcome_cost_us"] = std::move(combined);
      }
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create report directory: " + out_dir);
  }

  std::ostringstream fits;
  for (const auto& [name, series] : series_by_name) {
    export_csv(series, name, (fs::path(out_dir) / (name + ".csv")).string());
    export_plotdata(series, (fs::path(out_dir) / (name + ".dat")).string());
    append_fit_lines(fits, name, series);
  }
  write_text_file((fs::path(out_dir) / "fits.txt").string(), fits.str());
}

///
/// Compare
///

void
compare_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir)
{
  if (run_dirs.size() < 2) {
    throw IncompatibleRuns("compare requires at least two run directories");
  }

  std::vector<RunData> runs;
  runs.reserve(run_dirs.size());
  for (const auto& dir : run_dirs) {
    runs.push_back(load_run(dir));
  }

  std::vector<std::map<std::string, Series>> per_run;
  per_run.reserve(runs.size());
  for (const auto& run : runs) {
    std::map<std::string, Series> named;
    for (const auto& [name, values] : metric_samples(run.records)) {
      named[name] = aggregate(values);
    }
    per_run.push_back(std::move(named));
  }

  static const char* metrics[] = {
    "mean_latency_ms",     "max_latency_ms",      "commit_gen_cost_us",
    "commit_processing_cost_us", "commit_size_bytes",
  };

  struct Table
  {
    std::vector<double> buckets;
    std::vector<Series> columns; // one per run, aligned on buckets
  };
  std::map<std::string, Table> tables;

  for (const auto* metric : metrics) {
    bool everywhere = true;
    for (const auto& named : per_run) {
      auto it = named.find(metric);
      if (it == named.end() || it->second.empty()) {
        everywhere = false;
        break;
      }
    }
    if (!everywhere) {
      continue;
    }

    std::set<double> shared;
    for (const auto& point : per_run.front().at(metric)) {
      shared.insert(point.x);
    }
    for (size_t i = 1; i < per_run.size(); i++) {
      std::set<double> keep;
      for (const auto& point : per_run[i].at(metric)) {
        if (shared.count(point.x) > 0) {
          keep.insert(point.x);
        }
      }
      shared = std::move(keep);
    }
    if (shared.empty()) {
      continue;
    }

    Table table;
    table.buckets.assign(shared.begin(), shared.end());
    for (const auto& named : per_run) {
      Series column;
      for (const auto& point : named.at(metric)) {
        if (shared.count(point.x) > 0) {
          column.push_back(point);
        }
      }
      table.columns.push_back(std::move(column));
    }
    tables[metric] = std::move(table);
  }

  if (tables.empty()) {
    throw IncompatibleRuns("runs share no comparable metric buckets");
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create report directory: " + out_dir);
  }

  for (const auto& [metric, table] : tables) {
    std::ostringstream csv;
    csv << "group_size";
    for (const auto& run : runs) {
      csv << ',' << run.label;
    }
    csv << "\n";
    for (size_t row = 0; row < table.buckets.size(); row++) {
      csv << static_cast<uint64_t>(table.buckets[row]);
      for (const auto& column : table.columns) {
        csv << ',';
        csv.precision(17);
        csv << column[row].y;
      }
      csv << "\n";
    }
    write_text_file(
      (fs::path(out_dir) / ("compare_" + std::string(metric) + ".csv")).string(),
      csv.str());

    for (size_t i = 0; i < runs.size(); i++) {
      export_plotdata(table.columns[i],
                      (fs::path(out_dir) /
                       ("compare_" + std::string(metric) + "." + runs[i].label + ".dat"))
                        .string());
    }
  }
}

} // namespace cgkasim
