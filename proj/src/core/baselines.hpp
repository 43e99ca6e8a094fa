#pragma once

#include <string>
#include <vector>

#include "core/demand.hpp"
#include "core/rng.hpp"
#include "core/world.hpp"

namespace amod::baselines {

// Arrival-order greedy dispatch: accept a request iff some free-slot vehicle
// can serve it within the deadline at positive deterministic profit; among
// eligible vehicles pick the one whose post-committed-work position is
// closest to the request origin, ties by lowest vehicle index. Each vehicle
// takes at most one new request per step.
world::ActionVector greedy_act(const world::SystemState& state, const world::ZoneGraph& graph,
                               const world::PricingModel& prices, int max_wait);

struct TimedRequest {
  int step = 0;  // absolute arrival step
  world::Request request;
};

struct MpcConfig {
  int horizon_steps = 5;
  int schedule_cap = 3;          // max requests per candidate schedule
  long node_budget = 2000000;    // branch-and-bound node limit
  std::size_t pool_guard = 200000;  // max candidate schedules per instance
  bool perfect_information = false;
  bool deterministic_counts = false;  // round(lambda) instead of Poisson draws
};

// Future demand sampled from the estimated distribution for steps
// (t, t + horizon]; deterministic per generator state.
std::vector<TimedRequest> sample_virtual_requests(const demand::ODDistribution& dist,
                                                  const world::ZoneGraph& graph, int t,
                                                  int horizon, Rng& rng,
                                                  bool deterministic_counts);

struct CandidateSchedule {
  int vehicle = 0;
  std::vector<int> requests;  // pool indices, service order
  double profit = 0.0;
  std::vector<int> pickup_waits;
};

struct OfflinePlanInstance {
  int num_vehicles = 0;
  int num_real = 0;  // pool indices < num_real are real requests
  std::vector<TimedRequest> pool;
  std::vector<std::vector<CandidateSchedule>> per_vehicle;  // includes the empty schedule
};

// Enumerates, per vehicle, every deadline-feasible ordered schedule of up to
// `cap` pool requests, with exact profits from route simulation. Schedules
// carry at most one real request (only one new request can be assigned in the
// current step) and none when the vehicle has no free slot.
OfflinePlanInstance build_offline_instance(const world::SystemState& state,
                                           const world::ZoneGraph& graph,
                                           const world::PricingModel& prices, int max_wait,
                                           const std::vector<TimedRequest>& virtual_requests,
                                           int cap, std::size_t pool_guard = 200000);

struct SolveDiagnostics {
  long nodes = 0;
  double bound = 0.0;
  double gap = 0.0;
  bool optimal = true;
};

struct OfflinePlan {
  std::vector<int> chosen;  // per vehicle: index into its schedule list
  double objective = 0.0;
};

// Exact set-packing solve (one schedule per vehicle, each request covered at
// most once) by branch-and-bound with a sum-of-best-remaining bound.
// Deterministic: schedules are explored best-profit-first with a fixed
// tie-break, so the incumbent is unique. Within the node budget the result is
// optimal; otherwise the best incumbent is returned and diagnostics report
// the remaining gap.
OfflinePlan solve_offline(const OfflinePlanInstance& instance,
                          SolveDiagnostics* diagnostics = nullptr, long node_budget = 2000000);

// Pruning-free enumeration oracle for tests; guarded to small instances.
OfflinePlan solve_offline_exhaustive(const OfflinePlanInstance& instance);

// One receding-horizon MPC step: plan over real plus virtual requests,
// execute only the first-step decisions for real requests.
world::ActionVector mpc_act(const world::SystemState& state, const world::ZoneGraph& graph,
                            const world::PricingModel& prices, int max_wait,
                            const std::vector<TimedRequest>& virtual_requests,
                            const MpcConfig& config, SolveDiagnostics* diagnostics = nullptr);

}  // namespace amod::baselines
