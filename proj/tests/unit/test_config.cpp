#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "core/config.hpp"
#include "core/harness.hpp"

namespace {

using namespace amod;

const char* kSampleConfig = R"(
# experiment settings
horizon_override = 9

[episode]
horizon = 12        # inline comment
max_wait = 4
fleet_size = 3

[pricing]
revenue_rate = 5.0
cost_rate = "4.5"

[training]
alpha = 0.25
batch_size = 32

[run]
seeds = 3, 5, 8

[world]
synthetic = true
zones = 5
)";

}  // namespace

TEST_CASE("config parsing handles sections, comments, and quoting") {
  const config::KeyValueConfig kv = config::KeyValueConfig::parse(kSampleConfig);
  CHECK(kv.get_int("horizon_override", -1) == 9);
  CHECK(kv.get_int("episode.horizon", -1) == 12);
  CHECK(kv.get_double("pricing.cost_rate", 0.0) == doctest::Approx(4.5));
  CHECK(kv.get_bool("world.synthetic", false));
  CHECK(kv.get_seed_list("run.seeds") == std::vector<std::uint64_t>{3, 5, 8});
  CHECK(kv.get_string("missing", "fallback") == "fallback");
  CHECK_FALSE(kv.has("missing"));

  CHECK_THROWS(config::KeyValueConfig::parse("[unterminated\n"));
  CHECK_THROWS(config::KeyValueConfig::parse("no equals sign\n"));
  CHECK_THROWS(kv.get_double("world.synthetic", 0.0));
  CHECK_THROWS(kv.get_bool("episode.horizon", false));
}

TEST_CASE("environment variables override file values") {
  config::KeyValueConfig kv = config::KeyValueConfig::parse(kSampleConfig);
  setenv("AMOD_TRAINING_BATCH_SIZE", "64", 1);
  setenv("AMOD_EPISODE_HORIZON", "30", 1);
  kv.apply_environment_overrides();
  unsetenv("AMOD_TRAINING_BATCH_SIZE");
  unsetenv("AMOD_EPISODE_HORIZON");
  CHECK(kv.get_int("training.batch_size", -1) == 64);
  CHECK(kv.get_int("episode.horizon", -1) == 30);
  CHECK(kv.get_double("training.alpha", 0.0) == doctest::Approx(0.25));  // untouched
}

TEST_CASE("the config hash ignores field order but not content") {
  const config::KeyValueConfig a = config::KeyValueConfig::parse("[s]\nx = 1\ny = 2\n");
  const config::KeyValueConfig b = config::KeyValueConfig::parse("[s]\ny = 2\nx = 1\n");
  CHECK(a.hash() == b.hash());
  const config::KeyValueConfig c = config::KeyValueConfig::parse("[s]\nx = 1\ny = 3\n");
  CHECK(a.hash() != c.hash());
}

TEST_CASE("experiment config picks up typed fields") {
  const config::KeyValueConfig kv = config::KeyValueConfig::parse(kSampleConfig);
  const config::ExperimentConfig cfg = config::ExperimentConfig::from(kv);
  CHECK(cfg.episode.horizon == 12);
  CHECK(cfg.episode.max_wait == 4);
  CHECK(cfg.episode.fleet_size == 3);
  CHECK(cfg.prices.cost_rate == doctest::Approx(4.5));
  CHECK(cfg.sac.alpha == doctest::Approx(0.25));
  CHECK(cfg.sac.batch_size == 32);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 5, 8});
  CHECK(cfg.synthetic);
  CHECK(cfg.synthetic_zones == 5);
  CHECK(cfg.config_hash == kv.hash());
  // Untouched fields keep their defaults.
  CHECK(cfg.sac.gamma == doctest::Approx(0.9));
  CHECK(cfg.mpc_seeds == std::vector<std::uint64_t>{1, 2, 3});
}

TEST_CASE("manifest json round trips through the serializer") {
  config::RunManifest manifest;
  manifest.config_hash = "abc123";
  manifest.code_version = config::kCodeVersion;
  manifest.seeds = {1, 2};
  manifest.started_at = config::current_timestamp_utc();
  manifest.finished_at = manifest.started_at;
  manifest.artifacts = {"metrics_seed1.csv"};
  const std::string text = manifest.to_json_text();
  CHECK(text.find("\"config_hash\": \"abc123\"") != std::string::npos);
  CHECK(text.find("metrics_seed1.csv") != std::string::npos);
  CHECK(manifest.started_at.size() == 20);  // ISO-8601 Zulu
}

TEST_CASE("percent versus greedy guards the degenerate baseline") {
  bool defined = true;
  CHECK(harness::percent_vs_greedy(110.0, 100.0, &defined) == doctest::Approx(10.0));
  CHECK(defined);
  CHECK(harness::percent_vs_greedy(-55.0, -50.0, &defined) == doctest::Approx(-10.0));
  CHECK(defined);
  CHECK(std::isnan(harness::percent_vs_greedy(5.0, 0.0, &defined)));
  CHECK_FALSE(defined);
}

TEST_CASE("actor checkpoints round trip with their architecture") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "amod_actor_ckpt.bin").string();

  agents::ArchitectureConfig arch;
  arch.embedding_dim = 4;
  arch.request_attention_dim = 4;
  arch.vehicle_attention_dim = 4;
  arch.trunk_widths = {6, 5};
  Rng rng(31);
  const neural::ParameterSet actor = agents::build_actor_params(arch, rng);
  harness::save_actor_checkpoint(path, actor, arch, "{\"seed\":31}");

  const auto [loaded, loaded_arch] = harness::load_actor_checkpoint(path);
  CHECK(loaded_arch.embedding_dim == 4);
  CHECK(loaded_arch.trunk_widths == std::vector<int>{6, 5});
  CHECK(loaded.same_shapes(actor));
  for (const auto& [name, value] : actor.tensors()) {
    CHECK(loaded.at(name) == value);
  }
  fs::remove(path);
  CHECK_THROWS(harness::load_actor_checkpoint(path));
}

TEST_CASE("a synthetic workspace is assembled from the config alone") {
  config::KeyValueConfig kv;
  kv.set("world.synthetic", "true");
  kv.set("world.zones", "5");
  kv.set("episode.horizon", "6");
  kv.set("splits.train", "3");
  kv.set("splits.validation", "2");
  kv.set("splits.test", "1");
  const config::ExperimentConfig cfg = config::ExperimentConfig::from(kv);

  const harness::Workspace workspace = harness::build_workspace(cfg);
  CHECK(workspace.graph.node_count() == 5);
  CHECK(workspace.train_streams.size() == 3);
  CHECK(workspace.validation_streams.size() == 2);
  CHECK(workspace.test_streams.size() == 1);
  for (const auto& stream : workspace.train_streams) {
    CHECK(static_cast<int>(stream.steps.size()) == cfg.episode.horizon);
  }
  CHECK(workspace.norms.distance_scale > 0.0);

  // The same config reproduces the same streams.
  const harness::Workspace again = harness::build_workspace(cfg);
  CHECK(again.train_streams[0].total_requests() ==
        workspace.train_streams[0].total_requests());
}
