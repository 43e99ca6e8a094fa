#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/agents.hpp"
#include "core/baselines.hpp"
#include "core/training.hpp"
#include "core/world.hpp"

namespace amod::config {

// Flat key-value view of a TOML-style config file: `[section]` headers prefix
// the keys that follow ("section.key"), `#` starts a comment, values are
// scalars or comma-separated lists. Environment variables with the AMOD_
// prefix override file values (AMOD_TRAINING_ALPHA -> training.alpha).
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  void apply_environment_overrides();  // reads AMOD_* from the process env
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::uint64_t> get_seed_list(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Stable content hash: order-independent because entries are keyed.
  std::string hash() const;

 private:
  std::map<std::string, std::string> entries_;
};

struct ExperimentConfig {
  std::string graph_file;
  std::string trips_file;
  std::string streams_dir;
  std::string distribution_file;
  std::string checkpoint_file;
  std::string output_dir = "out";

  int train_dates = 200;
  int validation_dates = 25;
  int test_dates = 20;

  world::EpisodeConfig episode;
  world::PricingModel prices;
  training::SACConfig sac;
  baselines::MpcConfig mpc;
  agents::ArchitectureConfig arch;
  demand::IngestConfig ingest;

  std::vector<std::uint64_t> seeds = {1};
  std::vector<std::uint64_t> mpc_seeds = {1, 2, 3};

  // Hexagonal grid for ingestion and the estimation settings.
  int grid_radius = 3;
  double grid_neighbor_km = 0.459;
  bool grid_planar = true;
  double grid_ref_lon = 0.0;
  double grid_ref_lat = 0.0;
  int grid_edge_steps = 1;
  double estimate_epsilon = 1.0;
  int steps_per_interval = 15;

  // Synthetic-world settings used when no trip data is configured.
  bool synthetic = false;
  int synthetic_zones = 7;
  double synthetic_edge_km = 1.0;
  int synthetic_edge_steps = 1;
  double synthetic_lambda = 2.0;  // expected requests per step

  static ExperimentConfig from(const KeyValueConfig& kv);
  std::string config_hash;  // propagated from the source KeyValueConfig
};

struct RunManifest {
  std::string config_hash;
  std::string code_version;
  std::vector<std::uint64_t> seeds;
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;
  std::vector<std::string> artifacts;

  std::string to_json_text() const;
  void save(const std::string& path) const;
};

std::string current_timestamp_utc();

inline constexpr const char* kCodeVersion = "0.1.0";

}  // namespace amod::config
