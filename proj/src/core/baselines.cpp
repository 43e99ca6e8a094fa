#include "core/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace amod::baselines {

world::ActionVector greedy_act(const world::SystemState& state, const world::ZoneGraph& graph,
                               const world::PricingModel& prices, int max_wait) {
  const int R = static_cast<int>(state.new_requests.size());
  const int K = static_cast<int>(state.fleet.size());
  world::ActionVector action(R, world::kReject);
  std::vector<bool> taken(K, false);

  for (int i = 0; i < R; ++i) {
    const world::Request& request = state.new_requests[i];
    int best = -1;
    double best_distance = std::numeric_limits<double>::infinity();
    for (int j = 0; j < K; ++j) {
      if (taken[j] || !state.fleet[j].has_free_slot()) continue;
      if (!world::can_serve_within_deadline(state.fleet[j], request, graph, max_wait)) {
        continue;
      }
      const world::ServiceEstimate estimate =
          world::deterministic_service_profit(state.fleet[j], request, graph, prices,
                                              max_wait);
      if (estimate.profit <= 0.0) continue;
      const auto [steps, node] = world::committed_completion(state.fleet[j], graph);
      (void)steps;
      const double deadhead = graph.distance_km(node, request.origin);
      if (deadhead < best_distance) {
        best_distance = deadhead;
        best = j;
      }
    }
    if (best >= 0) {
      action[i] = best;
      taken[best] = true;
    }
  }
  return action;
}

std::vector<TimedRequest> sample_virtual_requests(const demand::ODDistribution& dist,
                                                  const world::ZoneGraph& graph, int t,
                                                  int horizon, Rng& rng,
                                                  bool deterministic_counts) {
  std::vector<TimedRequest> out;
  for (int step = t + 1; step <= t + horizon; ++step) {
    const int interval = dist.interval_of_step(step);
    const double per_step = dist.lambda(interval) / dist.steps_per_interval();
    const int count = deterministic_counts ? static_cast<int>(std::lround(per_step))
                                           : rng.poisson(per_step);
    for (int k = 0; k < count; ++k) {
      const auto [origin, destination] = dist.sample_pair(interval, rng);
      out.push_back({step, world::make_request(graph, origin, destination, step)});
    }
  }
  return out;
}

namespace {

struct PoolEntry {
  int arrival_step = 0;   // absolute
  int initial_wait = 0;   // already-accrued waiting time (real requests)
  world::NodeId origin = 0;
  world::NodeId destination = 0;
  double trip_distance = 0.0;
  bool real = false;
};

struct Enumerator {
  const world::ZoneGraph& graph;
  const world::PricingModel& prices;
  int max_wait;
  int cap;
  int now;  // current absolute step
  std::size_t pool_guard;
  const std::vector<PoolEntry>& pool;
  std::vector<CandidateSchedule>* schedules = nullptr;
  std::size_t* total_schedules = nullptr;
  int vehicle = 0;
  bool allow_real = false;

  CandidateSchedule current;

  void emit() {
    if (++*total_schedules > pool_guard) {
      throw std::runtime_error(
          "offline instance: candidate pool exceeds guard; lower the schedule cap");
    }
    schedules->push_back(current);
  }

  void extend(int time, world::NodeId node, std::vector<bool>& used, bool has_real) {
    if (static_cast<int>(current.requests.size()) >= cap) return;
    for (std::size_t r = 0; r < pool.size(); ++r) {
      if (used[r]) continue;
      const PoolEntry& entry = pool[r];
      // A real request is assigned into a slot immediately and the dynamics
      // serve slots in order, so it can only ever lead a schedule.
      if (entry.real && (!allow_real || has_real || !current.requests.empty())) continue;
      const int arrive_origin = time + graph.travel_time(node, entry.origin);
      const int pickup = std::max(arrive_origin, entry.arrival_step);
      const int wait = entry.initial_wait + pickup - entry.arrival_step;
      if (wait > max_wait) continue;
      const double deadhead = graph.distance_km(node, entry.origin);
      const double profit = prices.revenue_rate * entry.trip_distance -
                            prices.cost_rate * (deadhead + entry.trip_distance);

      used[r] = true;
      current.requests.push_back(static_cast<int>(r));
      current.pickup_waits.push_back(wait);
      current.profit += profit;
      emit();
      extend(pickup + graph.travel_time(entry.origin, entry.destination),
             entry.destination, used, has_real || entry.real);
      current.profit -= profit;
      current.pickup_waits.pop_back();
      current.requests.pop_back();
      used[r] = false;
    }
  }
};

}  // namespace

OfflinePlanInstance build_offline_instance(const world::SystemState& state,
                                           const world::ZoneGraph& graph,
                                           const world::PricingModel& prices, int max_wait,
                                           const std::vector<TimedRequest>& virtual_requests,
                                           int cap, std::size_t pool_guard) {
  OfflinePlanInstance instance;
  instance.num_vehicles = static_cast<int>(state.fleet.size());
  instance.num_real = static_cast<int>(state.new_requests.size());

  std::vector<PoolEntry> pool;
  for (const world::Request& r : state.new_requests) {
    instance.pool.push_back({state.t, r});
    pool.push_back({state.t, r.waiting_time.value_or(0), r.origin, r.destination,
                    r.trip_distance, true});
  }
  for (const TimedRequest& tr : virtual_requests) {
    instance.pool.push_back(tr);
    pool.push_back({tr.step, 0, tr.request.origin, tr.request.destination,
                    tr.request.trip_distance, false});
  }

  std::size_t total_schedules = 0;
  instance.per_vehicle.resize(instance.num_vehicles);
  for (int j = 0; j < instance.num_vehicles; ++j) {
    const world::Vehicle& vehicle = state.fleet[j];
    const auto [free_in, node] = world::committed_completion(vehicle, graph);
    Enumerator enumerator{graph,       prices, max_wait, cap, state.t, pool_guard,
                          pool,        &instance.per_vehicle[j], &total_schedules,
                          j,           vehicle.has_free_slot()};
    enumerator.current.vehicle = j;
    enumerator.emit();  // the empty schedule
    std::vector<bool> used(pool.size(), false);
    enumerator.extend(state.t + free_in, node, used, /*has_real=*/false);
  }
  return instance;
}

namespace {

bool schedule_less(const CandidateSchedule& a, const CandidateSchedule& b) {
  if (a.profit != b.profit) return a.profit > b.profit;
  return a.requests < b.requests;
}

struct BranchAndBound {
  const OfflinePlanInstance& instance;
  std::vector<std::vector<int>> order;   // per vehicle, schedule indices sorted
  std::vector<double> suffix_best;       // bound of remaining levels
  long node_budget = 0;
  bool use_bound = true;

  long nodes = 0;
  bool budget_exhausted = false;
  double incumbent = -std::numeric_limits<double>::infinity();
  std::vector<int> best_choice;
  std::vector<int> choice;
  std::vector<bool> used;

  void dfs(int level, double profit) {
    if (budget_exhausted) return;
    if (++nodes > node_budget && node_budget > 0) {
      budget_exhausted = true;
      return;
    }
    if (level == instance.num_vehicles) {
      if (profit > incumbent) {
        incumbent = profit;
        best_choice = choice;
      }
      return;
    }
    if (use_bound && profit + suffix_best[level] <= incumbent) return;
    for (int idx : order[level]) {
      const CandidateSchedule& schedule = instance.per_vehicle[level][idx];
      bool conflict = false;
      for (int r : schedule.requests) {
        if (used[r]) {
          conflict = true;
          break;
        }
      }
      if (conflict) continue;
      for (int r : schedule.requests) used[r] = true;
      choice[level] = idx;
      dfs(level + 1, profit + schedule.profit);
      for (int r : schedule.requests) used[r] = false;
      if (budget_exhausted) return;
    }
  }
};

OfflinePlan run_solver(const OfflinePlanInstance& instance, SolveDiagnostics* diagnostics,
                       long node_budget, bool use_bound) {
  BranchAndBound solver{instance};
  solver.node_budget = node_budget;
  solver.use_bound = use_bound;
  solver.order.resize(instance.num_vehicles);
  solver.suffix_best.assign(instance.num_vehicles + 1, 0.0);
  for (int j = 0; j < instance.num_vehicles; ++j) {
    auto& order = solver.order[j];
    order.resize(instance.per_vehicle[j].size());
    for (std::size_t s = 0; s < order.size(); ++s) order[s] = static_cast<int>(s);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return schedule_less(instance.per_vehicle[j][a], instance.per_vehicle[j][b]);
    });
  }
  for (int j = instance.num_vehicles - 1; j >= 0; --j) {
    double best = 0.0;
    for (const CandidateSchedule& schedule : instance.per_vehicle[j]) {
      best = std::max(best, schedule.profit);
    }
    solver.suffix_best[j] = solver.suffix_best[j + 1] + best;
  }
  solver.choice.assign(instance.num_vehicles, 0);
  solver.used.assign(instance.pool.size(), false);
  solver.dfs(0, 0.0);

  OfflinePlan plan;
  plan.chosen = solver.best_choice.empty() ? std::vector<int>(instance.num_vehicles, 0)
                                           : solver.best_choice;
  plan.objective = solver.best_choice.empty() ? 0.0 : solver.incumbent;
  if (diagnostics != nullptr) {
    diagnostics->nodes = solver.nodes;
    diagnostics->bound = solver.suffix_best.empty() ? 0.0 : solver.suffix_best[0];
    diagnostics->optimal = !solver.budget_exhausted;
    diagnostics->gap = solver.budget_exhausted
                           ? std::max(0.0, diagnostics->bound - plan.objective)
                           : 0.0;
  }
  return plan;
}

}  // namespace

OfflinePlan solve_offline(const OfflinePlanInstance& instance, SolveDiagnostics* diagnostics,
                          long node_budget) {
  return run_solver(instance, diagnostics, node_budget, /*use_bound=*/true);
}

OfflinePlan solve_offline_exhaustive(const OfflinePlanInstance& instance) {
  std::size_t product = 1;
  for (const auto& schedules : instance.per_vehicle) {
    product *= schedules.size();
    if (product > 10000000) {
      throw std::runtime_error("solve_offline_exhaustive: instance too large");
    }
  }
  return run_solver(instance, nullptr, /*node_budget=*/0, /*use_bound=*/false);
}

world::ActionVector mpc_act(const world::SystemState& state, const world::ZoneGraph& graph,
                            const world::PricingModel& prices, int max_wait,
                            const std::vector<TimedRequest>& virtual_requests,
                            const MpcConfig& config, SolveDiagnostics* diagnostics) {
  const OfflinePlanInstance instance =
      build_offline_instance(state, graph, prices, max_wait, virtual_requests,
                             config.schedule_cap, config.pool_guard);
  const OfflinePlan plan = solve_offline(instance, diagnostics, config.node_budget);

  world::ActionVector action(state.new_requests.size(), world::kReject);
  for (int j = 0; j < instance.num_vehicles; ++j) {
    const CandidateSchedule& schedule = instance.per_vehicle[j][plan.chosen[j]];
    for (int r : schedule.requests) {
      if (r < instance.num_real) {
        action[r] = j;  // at most one real request per schedule by construction
      }
    }
  }
  return action;
}

}  // namespace amod::baselines
