#include "amod/amod.h"

#include <cstring>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/config.hpp"
#include "core/harness.hpp"
#include "core/matching.hpp"
#include "core/rng.hpp"
#include "core/world.hpp"

namespace {

thread_local std::string g_last_error;

amod_status fail(amod_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs the body, translating exceptions into status codes + messages.
template <typename Fn>
amod_status guarded(Fn&& body) {
  try {
    return body();
  } catch (const std::invalid_argument& e) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(AMOD_ERROR_RUNTIME, e.what());
  }
}

char* copy_string(const std::string& text) {
  char* out = new char[text.size() + 1];
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

}  // namespace

struct amod_context {
  amod::config::KeyValueConfig kv;  // kept so overrides can rebuild the config
  amod::harness::RunOptions options;
};

struct amod_graph {
  amod::world::ZoneGraph graph;
};

struct amod_env {
  const amod::world::ZoneGraph* graph = nullptr;
  amod::world::PricingModel prices;
  amod::world::EpisodeConfig episode;
  amod::world::SystemState state;
  double total_profit = 0.0;
};

extern "C" {

const char* amod_version(void) { return amod::config::kCodeVersion; }

const char* amod_last_error(void) { return g_last_error.c_str(); }

void amod_string_free(char* text) { delete[] text; }

amod_status amod_context_create(const char* config_path, amod_context** out) {
  if (out == nullptr) return fail(AMOD_ERROR_INVALID_ARGUMENT, "out must not be null");
  *out = nullptr;
  return guarded([&]() -> amod_status {
    amod::config::KeyValueConfig kv;
    if (config_path != nullptr) {
      try {
        kv = amod::config::KeyValueConfig::load(config_path);
      } catch (const std::exception& e) {
        return fail(AMOD_ERROR_IO, e.what());
      }
    }
    kv.apply_environment_overrides();
    auto* context = new amod_context;
    context->kv = kv;
    context->options.cfg = amod::config::ExperimentConfig::from(kv);
    *out = context;
    return AMOD_OK;
  });
}

void amod_context_destroy(amod_context* context) { delete context; }

amod_status amod_context_set(amod_context* context, const char* key, const char* value) {
  if (context == nullptr || key == nullptr || value == nullptr) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "context, key, and value must not be null");
  }
  return guarded([&]() -> amod_status {
    // Re-derive the typed config so one setter keeps everything consistent;
    // commit only if the new value parses.
    amod::config::KeyValueConfig updated = context->kv;
    updated.set(key, value);
    context->options.cfg = amod::config::ExperimentConfig::from(updated);
    context->kv = std::move(updated);
    return AMOD_OK;
  });
}

amod_status amod_context_set_out_dir(amod_context* context, const char* dir) {
  if (context == nullptr || dir == nullptr) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "context and dir must not be null");
  }
  context->options.out_dir = dir;
  return AMOD_OK;
}

amod_status amod_context_add_seed(amod_context* context, uint64_t seed) {
  if (context == nullptr) return fail(AMOD_ERROR_INVALID_ARGUMENT, "context must not be null");
  context->options.seeds.push_back(seed);
  return AMOD_OK;
}

amod_status amod_context_set_policies(amod_context* context, const char* list) {
  if (context == nullptr || list == nullptr) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "context and list must not be null");
  }
  context->options.policies.clear();
  std::stringstream stream(list);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) context->options.policies.push_back(item);
  }
  return AMOD_OK;
}

amod_status amod_context_set_verbose(amod_context* context, int verbose) {
  if (context == nullptr) return fail(AMOD_ERROR_INVALID_ARGUMENT, "context must not be null");
  context->options.verbose = verbose != 0;
  return AMOD_OK;
}

amod_status amod_run(amod_context* context, const char* subcommand) {
  if (context == nullptr || subcommand == nullptr) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "context and subcommand must not be null");
  }
  return guarded([&]() -> amod_status {
    const std::string name = subcommand;
    int (*cmd)(const amod::harness::RunOptions&, std::ostream&) = nullptr;
    if (name == "ingest") cmd = amod::harness::cmd_ingest;
    else if (name == "estimate") cmd = amod::harness::cmd_estimate;
    else if (name == "train") cmd = amod::harness::cmd_train;
    else if (name == "evaluate") cmd = amod::harness::cmd_evaluate;
    else if (name == "compare") cmd = amod::harness::cmd_compare;
    else if (name == "kl-sweep") cmd = amod::harness::cmd_kl_sweep;
    else if (name == "bench-runtime") cmd = amod::harness::cmd_bench_runtime;
    else return fail(AMOD_ERROR_INVALID_ARGUMENT, "unknown subcommand: " + name);
    const int rc = cmd(context->options, std::cout);
    if (rc != 0) return fail(AMOD_ERROR_RUNTIME, name + " failed with code " + std::to_string(rc));
    return AMOD_OK;
  });
}

amod_status amod_graph_load(const char* path, amod_graph** out) {
  if (path == nullptr || out == nullptr) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "path and out must not be null");
  }
  *out = nullptr;
  return guarded([&]() -> amod_status {
    try {
      auto* graph = new amod_graph{amod::world::ZoneGraph::load(path)};
      *out = graph;
      return AMOD_OK;
    } catch (const std::runtime_error& e) {
      return fail(AMOD_ERROR_IO, e.what());
    }
  });
}

amod_status amod_graph_from_json(const char* json_text, amod_graph** out) {
  if (json_text == nullptr || out == nullptr) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "json_text and out must not be null");
  }
  *out = nullptr;
  return guarded([&]() -> amod_status {
    *out = new amod_graph{amod::world::ZoneGraph::from_json_text(json_text)};
    return AMOD_OK;
  });
}

void amod_graph_destroy(amod_graph* graph) { delete graph; }

int amod_graph_node_count(const amod_graph* graph) {
  return graph == nullptr ? -1 : graph->graph.node_count();
}

int amod_graph_travel_time(const amod_graph* graph, int u, int v) {
  if (graph == nullptr || u < 0 || v < 0 || u >= graph->graph.node_count() ||
      v >= graph->graph.node_count()) {
    return -1;
  }
  return graph->graph.travel_time(u, v);
}

double amod_graph_distance_km(const amod_graph* graph, int u, int v) {
  if (graph == nullptr || u < 0 || v < 0 || u >= graph->graph.node_count() ||
      v >= graph->graph.node_count()) {
    return -1.0;
  }
  return graph->graph.distance_km(u, v);
}

amod_status amod_matching_solve(const char* graph_json, char** result_json) {
  if (graph_json == nullptr || result_json == nullptr) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "graph_json and result_json must not be null");
  }
  *result_json = nullptr;
  return guarded([&]() -> amod_status {
    const nlohmann::json doc = nlohmann::json::parse(graph_json);
    amod::matching::ScoredBipartiteGraph graph;
    graph.num_requests = doc.at("num_requests").get<int>();
    graph.num_vehicles = doc.at("num_vehicles").get<int>();
    for (const auto& edge : doc.value("edges", nlohmann::json::array())) {
      graph.edges.push_back({edge.at("request").get<int>(), edge.at("vehicle").get<int>(),
                             edge.at("weight").get<double>()});
    }
    const amod::matching::Assignment assignment = amod::matching::solve_matching(graph);
    nlohmann::json result;
    result["pairs"] = nlohmann::json::array();
    for (const auto& [request, vehicle] : assignment.pairs) {
      result["pairs"].push_back({request, vehicle});
    }
    result["total_weight"] = assignment.total_weight;
    *result_json = copy_string(result.dump());
    return AMOD_OK;
  });
}

amod_status amod_env_create(const amod_graph* graph, int fleet_size, int horizon,
                            int max_wait, double revenue_rate, double cost_rate,
                            uint64_t seed, amod_env** out) {
  if (graph == nullptr || out == nullptr) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "graph and out must not be null");
  }
  if (fleet_size < 1 || horizon < 1 || max_wait < 0 || revenue_rate <= 0.0 ||
      cost_rate <= 0.0) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "invalid episode parameters");
  }
  *out = nullptr;
  return guarded([&]() -> amod_status {
    auto* env = new amod_env;
    env->graph = &graph->graph;
    env->prices = {revenue_rate, cost_rate};
    env->episode = {horizon, max_wait, fleet_size};
    env->state.t = 0;
    amod::Rng rng(seed);
    env->state.fleet = amod::world::place_fleet_uniform(graph->graph, fleet_size, rng);
    *out = env;
    return AMOD_OK;
  });
}

void amod_env_destroy(amod_env* env) { delete env; }

amod_status amod_env_add_request(amod_env* env, int origin, int destination) {
  if (env == nullptr) return fail(AMOD_ERROR_INVALID_ARGUMENT, "env must not be null");
  const int zones = env->graph->node_count();
  if (origin < 0 || origin >= zones || destination < 0 || destination >= zones ||
      origin == destination) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "invalid origin/destination pair");
  }
  return guarded([&]() -> amod_status {
    env->state.new_requests.push_back(
        amod::world::make_request(*env->graph, origin, destination, env->state.t));
    return AMOD_OK;
  });
}

amod_status amod_env_step(amod_env* env, const int* action, int action_length,
                          double* profit_out) {
  if (env == nullptr) return fail(AMOD_ERROR_INVALID_ARGUMENT, "env must not be null");
  if (action_length > 0 && action == nullptr) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "action must not be null when non-empty");
  }
  return guarded([&]() -> amod_status {
    const amod::world::ActionVector vector(action, action + action_length);
    const amod::world::ActionCheck check = amod::world::validate_action(env->state, vector);
    if (!check.ok) return fail(AMOD_ERROR_INVALID_ARGUMENT, check.violation);
    const amod::world::StepResult result =
        amod::world::step(env->state, vector, {}, *env->graph, env->prices, env->episode);
    env->state = result.next;
    env->total_profit += result.reward;
    if (profit_out != nullptr) *profit_out = result.reward;
    return AMOD_OK;
  });
}

int amod_env_time(const amod_env* env) { return env == nullptr ? -1 : env->state.t; }

double amod_env_total_profit(const amod_env* env) {
  return env == nullptr ? 0.0 : env->total_profit;
}

amod_status amod_env_state_json(const amod_env* env, char** state_json) {
  if (env == nullptr || state_json == nullptr) {
    return fail(AMOD_ERROR_INVALID_ARGUMENT, "env and state_json must not be null");
  }
  *state_json = nullptr;
  return guarded([&]() -> amod_status {
    nlohmann::json doc;
    doc["t"] = env->state.t;
    doc["total_profit"] = env->total_profit;
    doc["requests"] = nlohmann::json::array();
    for (const auto& request : env->state.new_requests) {
      doc["requests"].push_back({{"origin", request.origin},
                                 {"destination", request.destination},
                                 {"waiting_time", request.waiting_time.value_or(-1)}});
    }
    doc["fleet"] = nlohmann::json::array();
    for (const auto& vehicle : env->state.fleet) {
      doc["fleet"].push_back({{"position", vehicle.position},
                              {"arrival_countdown", vehicle.arrival_countdown},
                              {"assigned", vehicle.assigned_count()}});
    }
    *state_json = copy_string(doc.dump());
    return AMOD_OK;
  });
}

}  // extern "C"
