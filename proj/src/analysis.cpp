#include <cgkasim/analysis.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cgkasim {

///
/// Latency
///

double
LatencySample::mean_latency_ns() const
{
  if (process_ts.empty()) {
    throw DegenerateSeries("latency sample has no processing members");
  }
  double total = 0;
  for (auto ts : process_ts) {
    total += static_cast<double>(ts - commit_ts);
  }
  return total / static_cast<double>(process_ts.size());
}

uint64_t
LatencySample::max_latency_ns() const
{
  if (process_ts.empty()) {
    throw DegenerateSeries("latency sample has no processing members");
  }
  uint64_t worst = 0;
  for (auto ts : process_ts) {
    worst = std::max(worst, ts - commit_ts);
  }
  return worst;
}

LatencyReport
compute_latency(const std::vector<LogRecord>& records)
{
  std::map<std::string, std::vector<const LogRecord*>> by_group;
  for (const auto& record : records) {
    if (is_commit_action(record.action) || record.action == Action::process) {
      by_group[record.group].push_back(&record);
    }
  }

  LatencyReport report;
  for (auto& [group, group_records] : by_group) {
    std::stable_sort(group_records.begin(),
                     group_records.end(),
                     [](const LogRecord* lhs, const LogRecord* rhs) {
                       return lhs->timestamp_ns < rhs->timestamp_ns;
                     });

    bool open = false;
    LatencySample current;
    auto close = [&] {
      if (open) {
        report.samples.push_back(std::move(current));
        current = LatencySample{};
        open = false;
      }
    };

    for (const auto* record : group_records) {
      if (is_commit_action(record->action)) {
        close();
        open = true;
        current.group = group;
        current.committer = record->actor;
        current.action = record->action;
        current.group_size = record->group_size;
        current.commit_ts = record->timestamp_ns;
      } else if (open && record->counterpart == current.committer) {
        current.process_ts.push_back(record->timestamp_ns);
      } else {
        report.orphan_processes += 1;
      }
    }
    close();
  }
  return report;
}

///
/// Average update cost
///

double
auc(double cc, const std::vector<double>& cp, uint64_t n)
{
  if (n < 1) {
    throw BadArity("auc requires n >= 1");
  }
  if (!cp.empty() && cp.size() != n) {
    throw BadArity("auc requires len(cp) in {0, n}; got " +
                   std::to_string(cp.size()) + " for n=" + std::to_string(n));
  }
  double total = cc;
  for (auto value : cp) {
    total += value;
  }
  return total / static_cast<double>(n);
}

std::vector<CommitWindow>
commit_windows(const std::vector<LogRecord>& records)
{
  std::map<std::string, std::vector<const LogRecord*>> by_group;
  for (const auto& record : records) {
    if (is_commit_action(record.action) || record.action == Action::propose ||
        record.action == Action::process) {
      by_group[record.group].push_back(&record);
    }
  }

  std::vector<CommitWindow> windows;
  for (auto& [group, group_records] : by_group) {
    std::stable_sort(group_records.begin(),
                     group_records.end(),
                     [](const LogRecord* lhs, const LogRecord* rhs) {
                       return lhs->timestamp_ns < rhs->timestamp_ns;
                     });

    std::vector<double> batch_costs;
    std::vector<double> batch_sizes;
    CommitWindow* open = nullptr;
    for (const auto* record : group_records) {
      if (record->action == Action::propose) {
        batch_costs.push_back(static_cast<double>(record->cost_us));
        batch_sizes.push_back(static_cast<double>(record->size_bytes.value_or(0)));
        continue;
      }
      if (record->action == Action::process) {
        if (open != nullptr && record->counterpart == open->committer) {
          open->process_costs.push_back(static_cast<double>(record->cost_us));
        }
        continue;
      }
      CommitWindow window;
      window.group = group;
      window.committer = record->actor;
      window.action = record->action;
      window.group_size = record->group_size;
      window.commit_cost = static_cast<double>(record->cost_us);
      window.commit_size = static_cast<double>(record->size_bytes.value_or(0));
      window.proposal_costs = std::move(batch_costs);
      window.proposal_sizes = std::move(batch_sizes);
      window.modifications =
        window.proposal_costs.empty() ? 1 : window.proposal_costs.size();
      batch_costs.clear();
      batch_sizes.clear();
      windows.push_back(std::move(window));
      open = &windows.back();
    }
  }
  return windows;
}

std::vector<UpdateCostSample>
compute_update_costs(const std::vector<LogRecord>& records, Dimension dimension)
{
  std::vector<UpdateCostSample> samples;
  for (auto& window : commit_windows(records)) {
    UpdateCostSample sample;
    sample.group = window.group;
    sample.group_size = window.group_size;
    sample.modifications = window.modifications;
    if (dimension == Dimension::cost_us) {
      sample.commit_value = window.commit_cost;
      sample.proposal_values = std::move(window.proposal_costs);
    } else {
      sample.commit_value = window.commit_size;
      sample.proposal_values = std::move(window.proposal_sizes);
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

///
/// Aggregation and regression
///

Series
aggregate(const std::vector<std::pair<uint64_t, double>>& samples)
{
  std::map<uint64_t, std::pair<double, uint64_t>> buckets;
  for (const auto& [bucket, value] : samples) {
    auto& [sum, count] = buckets[bucket];
    sum += value;
    count += 1;
  }
  Series series;
  series.reserve(buckets.size());
  for (const auto& [bucket, entry] : buckets) {
    series.push_back({ static_cast<double>(bucket),
                       entry.first / static_cast<double>(entry.second) });
  }
  return series;
}

RegressionFit
fit(const Series& series, FitModel model)
{
  if (series.size() < 3) {
    throw DegenerateSeries("regression requires at least 3 points, got " +
                           std::to_string(series.size()));
  }

  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(series.size());
  ys.reserve(series.size());
  for (const auto& point : series) {
    if (model == FitModel::logarithmic) {
      if (point.x <= 0) {
        throw DegenerateSeries("logarithmic fit requires positive x");
      }
      xs.push_back(std::log(point.x));
    } else {
      xs.push_back(point.x);
    }
    ys.push_back(point.y);
  }

  auto n = static_cast<double>(xs.size());
  double x_mean = 0;
  double y_mean = 0;
  for (size_t i = 0; i < xs.size(); i++) {
    x_mean += xs[i];
    y_mean += ys[i];
  }
  x_mean /= n;
  y_mean /= n;

  double sxx = 0;
  double sxy = 0;
  for (size_t i = 0; i < xs.size(); i++) {
    sxx += (xs[i] - x_mean) * (xs[i] - x_mean);
    sxy += (xs[i] - x_mean) * (ys[i] - y_mean);
  }
  if (sxx == 0) {
    throw DegenerateSeries("regression requires non-constant x");
  }

  RegressionFit result;
  result.model = model;
  result.slope = sxy / sxx;
  result.intercept = y_mean - result.slope * x_mean;

  double ss_res = 0;
  double ss_tot = 0;
  for (size_t i = 0; i < xs.size(); i++) {
    auto predicted = result.slope * xs[i] + result.intercept;
    ss_res += (ys[i] - predicted) * (ys[i] - predicted);
    ss_tot += (ys[i] - y_mean) * (ys[i] - y_mean);
  }
  if (ss_tot == 0) {
    result.r_squared = ss_res == 0 ? 1.0 : 0.0;
  } else {
    result.r_squared = 1.0 - ss_res / ss_tot;
  }
  return result;
}

///
/// Exports
///

static std::string
render_number(double value)
{
  if (value == std::floor(value) && std::abs(value) < 1e15) {
    std::ostringstream out;
    out << static_cast<long long>(value);
    return out.str();
  }
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

void
export_csv(const Series& series,
           const std::string& metric_name,
           const std::string& path)
{
  if (metric_name.empty() ||
      metric_name.find_first_of(",\"\r\n ") != std::string::npos) {
    throw InvalidParameterError("metric name must be a bare CSV token");
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw IoError("cannot write CSV file: " + path);
  }
  file << "group_size," << metric_name << "\n";
  for (const auto& point : series) {
    file << render_number(point.x) << ',' << render_number(point.y) << "\n";
  }
  if (!file) {
    throw IoError("failed writing CSV file: " + path);
  }
}

void
export_plotdata(const Series& series, const std::string& path)
{
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw IoError("cannot write plot data file: " + path);
  }
  for (const auto& point : series) {
    file << render_number(point.x) << ' ' << render_number(point.y) << "\n";
  }
  if (!file) {
    throw IoError("failed writing plot data file: " + path);
  }
}

Series
import_csv(const std::string& path, std::string* metric_name)
{
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw OpenError("cannot open CSV file: " + path);
  }

  std::string line;
  if (!std::getline(file, line)) {
    throw BadLine(path + ": missing CSV header");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  auto comma = line.find(',');
  if (comma == std::string::npos || line.substr(0, comma) != "group_size") {
    throw BadLine(path + ": malformed CSV header: " + line);
  }
  if (metric_name != nullptr) {
    *metric_name = line.substr(comma + 1);
  }

  Series series;
  size_t line_number = 1;
  while (std::getline(file, line)) {
    line_number += 1;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    comma = line.find(',');
    if (comma == std::string::npos) {
      throw BadLine(path + ": line " + std::to_string(line_number) +
                    ": expected x,y");
    }
    try {
      series.push_back({ std::stod(line.substr(0, comma)),
                         std::stod(line.substr(comma + 1)) });
    } catch (const std::exception&) {
      throw BadLine(path + ": line " + std::to_string(line_number) +
                    ": malformed number");
    }
  }
  return series;
}

} // namespace cgkasim
