#include "core/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

extern char** environ;

namespace amod::config {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error("config line " + std::to_string(line_number) +
                                 ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_number) +
                               ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_number) + ": empty key");
    }
    config.entries_[section.empty() ? key : section + "." + key] = value;
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  KeyValueConfig config = parse(buffer.str());
  config.apply_environment_overrides();
  return config;
}

void KeyValueConfig::apply_environment_overrides() {
  for (char** env = environ; env != nullptr && *env != nullptr; ++env) {
    const std::string entry = *env;
    if (entry.rfind("AMOD_", 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = to_lower(entry.substr(5, eq - 5));
    // The first underscore separates the section; later ones stay literal
    // (AMOD_TRAINING_BATCH_SIZE -> training.batch_size).
    const auto sep = key.find('_');
    if (sep != std::string::npos) key[sep] = '.';
    entries_[key] = entry.substr(eq + 1);
  }
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not a number: " + it->second);
  }
}

long KeyValueConfig::get_long(const std::string& key, long fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    return std::stol(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not an integer: " + it->second);
  }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  return static_cast<int>(get_long(key, fallback));
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string value = to_lower(it->second);
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw std::runtime_error("config key " + key + ": not a boolean: " + it->second);
}

std::vector<std::uint64_t> KeyValueConfig::get_seed_list(const std::string& key) const {
  std::vector<std::uint64_t> seeds;
  const auto it = entries_.find(key);
  if (it == entries_.end()) return seeds;
  std::istringstream in(it->second);
  std::string token;
  while (std::getline(in, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    seeds.push_back(std::stoull(token));
  }
  return seeds;
}

std::string KeyValueConfig::hash() const {
  // FNV-1a over the sorted "key=value" entries; std::map iteration is already
  // sorted, so the hash is independent of the file's field order.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const std::string& s) {
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [key, value] : entries_) {
    mix(key);
    mix("=");
    mix(value);
    mix("\n");
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

ExperimentConfig ExperimentConfig::from(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  cfg.graph_file = kv.get_string("paths.graph");
  cfg.trips_file = kv.get_string("paths.trips");
  cfg.streams_dir = kv.get_string("paths.streams");
  cfg.distribution_file = kv.get_string("paths.distribution");
  cfg.checkpoint_file = kv.get_string("paths.checkpoint");
  cfg.output_dir = kv.get_string("paths.output", cfg.output_dir);

  cfg.train_dates = kv.get_int("splits.train", cfg.train_dates);
  cfg.validation_dates = kv.get_int("splits.validation", cfg.validation_dates);
  cfg.test_dates = kv.get_int("splits.test", cfg.test_dates);

  cfg.episode.horizon = kv.get_int("episode.horizon", cfg.episode.horizon);
  cfg.episode.max_wait = kv.get_int("episode.max_wait", cfg.episode.max_wait);
  cfg.episode.fleet_size = kv.get_int("episode.fleet_size", cfg.episode.fleet_size);

  cfg.prices.revenue_rate = kv.get_double("pricing.revenue_rate", cfg.prices.revenue_rate);
  cfg.prices.cost_rate = kv.get_double("pricing.cost_rate", cfg.prices.cost_rate);

  cfg.sac.alpha = kv.get_double("training.alpha", cfg.sac.alpha);
  cfg.sac.gamma = kv.get_double("training.gamma", cfg.sac.gamma);
  cfg.sac.target_smoothing = kv.get_double("training.target_smoothing", cfg.sac.target_smoothing);
  cfg.sac.batch_size = kv.get_int("training.batch_size", cfg.sac.batch_size);
  cfg.sac.total_steps = kv.get_long("training.total_steps", cfg.sac.total_steps);
  cfg.sac.warmup_steps = kv.get_long("training.warmup_steps", cfg.sac.warmup_steps);
  cfg.sac.update_period = kv.get_int("training.update_period", cfg.sac.update_period);
  cfg.sac.gradient_iterations =
      kv.get_int("training.gradient_iterations", cfg.sac.gradient_iterations);
  cfg.sac.validation_period =
      kv.get_long("training.validation_period", cfg.sac.validation_period);
  cfg.sac.buffer_capacity = static_cast<std::size_t>(
      kv.get_long("training.buffer_capacity", static_cast<long>(cfg.sac.buffer_capacity)));
  cfg.sac.learning_rate = kv.get_double("training.learning_rate", cfg.sac.learning_rate);
  cfg.sac.l2_coefficient = kv.get_double("training.l2_coefficient", cfg.sac.l2_coefficient);
  cfg.sac.clip_ratio = kv.get_double("training.clip_ratio", cfg.sac.clip_ratio);
  cfg.sac.huber_delta = kv.get_double("training.huber_delta", cfg.sac.huber_delta);

  cfg.mpc.horizon_steps = kv.get_int("mpc.horizon_steps", cfg.mpc.horizon_steps);
  cfg.mpc.schedule_cap = kv.get_int("mpc.schedule_cap", cfg.mpc.schedule_cap);
  cfg.mpc.node_budget = kv.get_long("mpc.node_budget", cfg.mpc.node_budget);
  cfg.mpc.perfect_information =
      kv.get_bool("mpc.perfect_information", cfg.mpc.perfect_information);
  cfg.mpc.deterministic_counts =
      kv.get_bool("mpc.deterministic_counts", cfg.mpc.deterministic_counts);

  cfg.arch.embedding_dim = kv.get_int("network.embedding_dim", cfg.arch.embedding_dim);
  cfg.arch.request_attention_dim =
      kv.get_int("network.request_attention_dim", cfg.arch.request_attention_dim);
  cfg.arch.vehicle_attention_dim =
      kv.get_int("network.vehicle_attention_dim", cfg.arch.vehicle_attention_dim);
  if (kv.has("network.trunk_widths")) {
    cfg.arch.trunk_widths.clear();
    for (std::uint64_t w : kv.get_seed_list("network.trunk_widths")) {
      cfg.arch.trunk_widths.push_back(static_cast<int>(w));
    }
  }

  cfg.ingest.window_start_minute =
      kv.get_int("ingest.window_start_minute", cfg.ingest.window_start_minute);
  cfg.ingest.window_minutes = kv.get_int("ingest.window_minutes", cfg.ingest.window_minutes);
  cfg.ingest.step_seconds = kv.get_int("ingest.step_seconds", cfg.ingest.step_seconds);
  cfg.ingest.downscale = kv.get_int("ingest.downscale", cfg.ingest.downscale);

  cfg.grid_radius = kv.get_int("grid.radius", cfg.grid_radius);
  cfg.grid_neighbor_km = kv.get_double("grid.neighbor_km", cfg.grid_neighbor_km);
  cfg.grid_planar = kv.get_bool("grid.planar", cfg.grid_planar);
  cfg.grid_ref_lon = kv.get_double("grid.ref_lon", cfg.grid_ref_lon);
  cfg.grid_ref_lat = kv.get_double("grid.ref_lat", cfg.grid_ref_lat);
  cfg.grid_edge_steps = kv.get_int("grid.edge_steps", cfg.grid_edge_steps);
  cfg.estimate_epsilon = kv.get_double("estimate.epsilon", cfg.estimate_epsilon);
  cfg.steps_per_interval = kv.get_int("estimate.steps_per_interval", cfg.steps_per_interval);

  if (kv.has("run.seeds")) cfg.seeds = kv.get_seed_list("run.seeds");
  if (kv.has("mpc.seeds")) cfg.mpc_seeds = kv.get_seed_list("mpc.seeds");

  cfg.synthetic = kv.get_bool("world.synthetic", cfg.synthetic);
  cfg.synthetic_zones = kv.get_int("world.zones", cfg.synthetic_zones);
  cfg.synthetic_edge_km = kv.get_double("world.edge_km", cfg.synthetic_edge_km);
  cfg.synthetic_edge_steps = kv.get_int("world.edge_steps", cfg.synthetic_edge_steps);
  cfg.synthetic_lambda = kv.get_double("world.lambda", cfg.synthetic_lambda);

  cfg.config_hash = kv.hash();
  return cfg;
}

std::string RunManifest::to_json_text() const {
  nlohmann::json doc;
  doc["config_hash"] = config_hash;
  doc["code_version"] = code_version;
  doc["seeds"] = seeds;
  doc["started_at"] = started_at;
  doc["finished_at"] = finished_at;
  doc["artifacts"] = artifacts;
  return doc.dump(2);
}

void RunManifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << to_json_text() << "\n";
}

std::string current_timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

}  // namespace amod::config
