#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/training.hpp"

namespace amod::harness {

// Options shared by every subcommand; CLI flags override config values.
struct RunOptions {
  config::ExperimentConfig cfg;
  std::string out_dir;                 // overrides cfg.output_dir when set
  std::vector<std::uint64_t> seeds;    // overrides cfg.seeds when non-empty
  std::vector<std::string> policies;   // compare: subset of {greedy, mpc, rl}
  std::vector<int> fleet_sizes;        // bench-runtime sweep
  std::vector<long> sweep_sizes;       // kl-sweep sample counts
  bool verbose = false;
};

// Fully assembled experiment world: graph, normalization, request streams
// split into train/validation/test, and the estimated distribution if one is
// configured.
struct Workspace {
  world::ZoneGraph graph;
  agents::NormalizationConstants norms;
  std::vector<demand::RequestStream> train_streams;
  std::vector<demand::RequestStream> validation_streams;
  std::vector<demand::RequestStream> test_streams;
  std::optional<demand::ODDistribution> distribution;
};

Workspace build_workspace(const config::ExperimentConfig& cfg);

int cmd_ingest(const RunOptions& options, std::ostream& log);
int cmd_estimate(const RunOptions& options, std::ostream& log);
int cmd_train(const RunOptions& options, std::ostream& log);
int cmd_evaluate(const RunOptions& options, std::ostream& log);
int cmd_compare(const RunOptions& options, std::ostream& log);
int cmd_kl_sweep(const RunOptions& options, std::ostream& log);
int cmd_bench_runtime(const RunOptions& options, std::ostream& log);

// Shared helpers, exposed for tests.
training::PolicyFn make_greedy_policy(const world::ZoneGraph& graph,
                                      const world::PricingModel& prices, int max_wait);

// MPC as a per-step policy. With perfect information the true future of the
// given stream is used; otherwise virtual requests are sampled from the
// distribution each step.
training::PolicyFn make_mpc_policy(const world::ZoneGraph& graph,
                                   const world::PricingModel& prices, int max_wait,
                                   const baselines::MpcConfig& mpc,
                                   const demand::ODDistribution* distribution,
                                   const demand::RequestStream* true_future,
                                   int horizon_override = -1);

// Percentage-vs-greedy with the degenerate-baseline guard; flagged rows carry
// NaN.
double percent_vs_greedy(double policy_profit, double greedy_profit, bool* defined = nullptr);

// Loads an actor checkpoint saved by cmd_train (metadata carries the
// architecture).
std::pair<neural::ParameterSet, agents::ArchitectureConfig> load_actor_checkpoint(
    const std::string& path);

void save_actor_checkpoint(const std::string& path, const neural::ParameterSet& actor,
                           const agents::ArchitectureConfig& arch,
                           const std::string& extra_metadata_json = "{}");

}  // namespace amod::harness
