#include <cgkasim/scenario.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace cgkasim;

static AuthPolicy
policy_from_flag(const std::string& flag)
{
  if (flag == "first") {
    return AuthPolicy::first;
  }
  if (flag == "last") {
    return AuthPolicy::last;
  }
  return AuthPolicy::random;
}

int
main(int argc, char** argv)
{
  CLI::App app{ "Group key agreement testbed: run simulated clients against a "
                "pub-sub delivery service and analyze the resulting logs" };
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::string out_dir;
  uint64_t seed = 1;
  uint32_t replicas = 0;
  std::string ds;
  std::string policy;
  std::string paradigm;
  uint32_t proposals_per_commit = 0;
  uint32_t target_size = 0;
  uint64_t duration_ms = 0;
  std::string provider = "sodium";
  std::string cost_source = "cpu";

  auto* run = app.add_subcommand("run", "simulate clients and write a run directory");
  run->add_option("--config", config_path, "client configuration file")
    ->required()
    ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "run directory to create")->required();
  run->add_option("--seed", seed, "master seed for the deterministic run");
  run->add_option("--replicas", replicas, "override the number of clients");
  run->add_option("--ds", ds, "override the delivery service")
    ->check(CLI::IsMember({ "mqtt", "gossipsub" }));
  run->add_option("--policy", policy, "override who may commit")
    ->check(CLI::IsMember({ "first", "last", "random" }));
  run->add_option("--paradigm", paradigm, "override the commit paradigm")
    ->check(CLI::IsMember({ "commit", "propose" }));
  run->add_option("--proposals-per-commit", proposals_per_commit,
                  "override proposals batched per commit");
  run->add_option("--target-size", target_size,
                  "stop once any group reaches this many members");
  run->add_option("--duration-ms", duration_ms, "stop after this much virtual time");
  run->add_option("--provider", provider, "cryptography provider")
    ->check(CLI::IsMember({ "sodium", "mock" }));
  run->add_option("--cost-source", cost_source, "cost column source")
    ->check(CLI::IsMember({ "cpu", "zero" }));

  // analyze
  std::vector<std::string> analyze_dirs;
  std::string analyze_out;
  auto* analyze = app.add_subcommand(
    "analyze", "average one or more runs into per-metric series and fits");
  analyze->add_option("dirs", analyze_dirs, "run directories")->required();
  analyze->add_option("--out", analyze_out, "report directory to create")->required();

  // compare
  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand(
    "compare", "align two or more runs on shared group-size buckets");
  compare->add_option("dirs", compare_dirs, "run directories")->required();
  compare->add_option("--out", compare_out, "report directory to create")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ScenarioSpec spec;
      spec.config = load_client_config(config_path);
      spec.seed = seed;
      if (replicas > 0) {
        spec.replicas_override = replicas;
      }
      if (!ds.empty()) {
        spec.ds_override = ds;
      }
      if (!policy.empty()) {
        spec.policy_override = policy_from_flag(policy);
      }
      if (!paradigm.empty()) {
        spec.paradigm_override = paradigm_from_name(paradigm);
      }
      if (proposals_per_commit > 0) {
        spec.proposals_per_commit_override = proposals_per_commit;
      }
      if (target_size > 0) {
        spec.target_size = target_size;
      }
      if (duration_ms > 0) {
        spec.duration_ms = duration_ms;
      }
      spec.provider_name = provider;
      spec.cost_source = cost_source_from_name(cost_source);

      const auto result = run_to_directory(spec, out_dir);
      std::cout << "wrote " << result.records.size() << " records to " << out_dir
                << " (largest group " << result.final_max_group << ", "
                << ns_to_ms(result.ended_at) << " virtual ms)\n";
    } else if (analyze->parsed()) {
      analyze_runs(analyze_dirs, analyze_out);
      std::cout << "wrote report to " << analyze_out << "\n";
    } else if (compare->parsed()) {
      compare_runs(compare_dirs, compare_out);
      std::cout << "wrote comparison to " << compare_out << "\n";
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
