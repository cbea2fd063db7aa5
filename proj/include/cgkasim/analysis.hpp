#pragma once

#include <cgkasim/logrec.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace cgkasim {

///
/// Pure metric computations over immutable record sets.
///

struct LatencySample
{
  std::string group;
  std::string committer;
  Action action = Action::invite; // kind of the commit
  uint64_t group_size = 1;
  uint64_t commit_ts = 0;              // generation timestamp
  std::vector<uint64_t> process_ts;    // one per processing member

  bool has_latency() const { return !process_ts.empty(); }
  double mean_latency_ns() const;
  uint64_t max_latency_ns() const;
};

struct LatencyReport
{
  std::vector<LatencySample> samples;
  uint64_t orphan_processes = 0; // Process records with no matching commit
};

// pair each commit-generating record (Invite/Remove/Update/Join) with the
// Process records naming its committer that land before the group's next
// commit; records are stably ordered by timestamp per group first
LatencyReport compute_latency(const std::vector<LogRecord>& records);

// average update cost: (cc + sum of cp) / n; len(cp) must be 0 or n
double auc(double cc, const std::vector<double>& cp, uint64_t n);

struct UpdateCostSample
{
  std::string group;
  uint64_t group_size = 1;
  double commit_value = 0;            // cc for the chosen dimension
  std::vector<double> proposal_values; // cp, empty in the commit paradigm
  uint64_t modifications = 1;          // n

  double value() const { return auc(commit_value, proposal_values, modifications); }
};

// which field of a record feeds a metric
enum struct Dimension : uint8_t
{
  cost_us = 0,
  size_bytes = 1,
};

// Everything attributable to one commit: the Propose records since the
// group's previous commit (its batch) and the Process records naming the
// committer before the group's next commit.
struct CommitWindow
{
  std::string group;
  std::string committer;
  Action action = Action::invite;
  uint64_t group_size = 1;
  double commit_cost = 0;
  double commit_size = 0;
  std::vector<double> proposal_costs;
  std::vector<double> proposal_sizes;
  std::vector<double> process_costs;
  uint64_t modifications = 1; // max(batch size, 1)
};

std::vector<CommitWindow> commit_windows(const std::vector<LogRecord>& records);

// per commit: cc from the commit record, cp from the Propose records since
// the group's previous commit, n = max(batch size, 1); under the commit
// paradigm windows hold no Propose records, so n = 1 and cp is empty
std::vector<UpdateCostSample> compute_update_costs(
  const std::vector<LogRecord>& records,
  Dimension dimension);

///
/// Series over group size
///

struct SeriesPoint
{
  double x = 0;
  double y = 0;

  friend bool operator==(const SeriesPoint& lhs, const SeriesPoint& rhs) = default;
};

using Series = std::vector<SeriesPoint>;

// arithmetic mean of samples per bucket, ascending bucket order;
// buckets without samples are omitted
Series aggregate(const std::vector<std::pair<uint64_t, double>>& samples);

enum struct FitModel : uint8_t
{
  linear = 0,      // y = slope * x + intercept
  logarithmic = 1, // y = slope * ln(x) + intercept
};

struct RegressionFit
{
  FitModel model = FitModel::linear;
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

// least-squares fit; throws DegenerateSeries for fewer than 3 points or
// constant x (logarithmic model additionally requires positive x)
RegressionFit fit(const Series& series, FitModel model);

///
/// Exports
///

// header "group_size,<metric_name>", one "x,y" row per point
void export_csv(const Series& series,
                const std::string& metric_name,
                const std::string& path);

// whitespace-separated "x y" rows
void export_plotdata(const Series& series, const std::string& path);

// inverse of export_csv; returns the series, optionally the metric name
Series import_csv(const std::string& path, std::string* metric_name = nullptr);

} // namespace cgkasim
