// Command-line front door for the amod dispatch laboratory. Thin shell over
// the C API: every subcommand builds a context from the config file plus the
// shared flags and dispatches to the library.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amod/amod.h"

namespace {

struct CliOptions {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::string policies;
  bool verbose = false;
};

void add_shared_flags(CLI::App* cmd, CliOptions& options) {
  cmd->add_option("--config", options.config_path, "Path to the experiment config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", options.seeds, "Random seed (repeatable)");
  cmd->add_option("--out", options.out_dir, "Output directory for run artifacts");
  cmd->add_option("--policies", options.policies,
                  "Comma-separated policies for compare (greedy,mpc,rl)");
  cmd->add_flag("--verbose", options.verbose, "Chatty progress output");
}

int run_subcommand(const char* name, const CliOptions& options) {
  amod_context* context = nullptr;
  amod_status status = amod_context_create(
      options.config_path.empty() ? nullptr : options.config_path.c_str(), &context);
  if (status != AMOD_OK) {
    std::fprintf(stderr, "error: %s\n", amod_last_error());
    return 1;
  }
  if (!options.out_dir.empty()) amod_context_set_out_dir(context, options.out_dir.c_str());
  for (const std::uint64_t seed : options.seeds) amod_context_add_seed(context, seed);
  if (!options.policies.empty()) {
    amod_context_set_policies(context, options.policies.c_str());
  }
  amod_context_set_verbose(context, options.verbose ? 1 : 0);

  status = amod_run(context, name);
  if (status != AMOD_OK) std::fprintf(stderr, "error: %s\n", amod_last_error());
  amod_context_destroy(context);
  return status == AMOD_OK ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Profit-maximizing autonomous mobility-on-demand dispatch lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(amod_version()));

  const std::vector<std::pair<const char*, const char*>> subcommands = {
      {"ingest", "Convert trip records into per-date request streams"},
      {"estimate", "Estimate the origin-destination demand distribution"},
      {"train", "Train the dispatch policy with SAC (one run per seed)"},
      {"evaluate", "Evaluate a trained checkpoint on the test dates"},
      {"compare", "Compare policies on shared test streams"},
      {"kl-sweep", "Sweep estimation sample sizes and report KL vs truth"},
      {"bench-runtime", "Time per-step action computation across fleet sizes"},
  };

  CliOptions options;
  for (const auto& [name, description] : subcommands) {
    CLI::App* cmd = app.add_subcommand(name, description);
    add_shared_flags(cmd, options);
    cmd->callback([name = name, &options] {
      const int rc = run_subcommand(name, options);
      if (rc != 0) throw CLI::RuntimeError(rc);
    });
  }

  CLI11_PARSE(app, argc, argv);
  return 0;
}
