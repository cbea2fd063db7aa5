#pragma once

#include <cgkasim/analysis.hpp>
#include <cgkasim/client.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cgkasim {

///
/// Scenario runner: spawns configured clients against a delivery service on
/// the virtual clock, gathers their log records, and persists run
/// directories that the offline analyze/compare steps consume.
///

struct ScenarioSpec
{
  ClientConfig config;
  uint64_t seed = 1;

  // command-line overrides on top of the config file
  std::optional<uint32_t> replicas_override;
  std::optional<std::string> ds_override;
  std::optional<AuthPolicy> policy_override;
  std::optional<Paradigm> paradigm_override;
  std::optional<uint32_t> proposals_per_commit_override;

  // exactly one termination condition
  std::optional<uint32_t> target_size;
  std::optional<uint64_t> duration_ms;

  std::string provider_name = "sodium";
  CostSource cost_source = CostSource::cpu;

  ClientConfig effective_config() const;
  void validate() const;
};

struct RunResult
{
  std::vector<LogRecord> records;
  ClientStats totals; // summed over clients
  std::vector<std::string> user_ids;
  uint32_t final_max_group = 0;
  VirtualTime ended_at = 0;
  bool target_reached = false;
};

RunResult run_scenario(const ScenarioSpec& spec);

// run + persist: <out_dir>/events.log, manifest.txt, config.toml
RunResult run_to_directory(const ScenarioSpec& spec, const std::string& out_dir);

///
/// Offline analysis over persisted runs
///

struct RunData
{
  std::string label; // directory basename
  std::map<std::string, std::string> manifest;
  std::vector<LogRecord> records;
};

RunData load_run(const std::string& run_dir);

// per-metric CSV + plot-data series vs group size, per-paradigm auc series,
// and linear/logarithmic fits for every emitted series (fits.txt)
void analyze_runs(const std::vector<std::string>& run_dirs,
                  const std::string& out_dir);

// aligned per-run series on shared group-size buckets; needs >= 2 runs
void compare_runs(const std::vector<std::string>& run_dirs,
                  const std::string& out_dir);

///
/// Series builders shared by analyze, compare, and tests
///

// named (metric -> series) extraction from one record set; latency pairing
// runs per record set, so pass records of a single run at a time
std::map<std::string, std::vector<std::pair<uint64_t, double>>>
metric_samples(const std::vector<LogRecord>& records);

} // namespace cgkasim
