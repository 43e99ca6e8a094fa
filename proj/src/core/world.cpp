#include "core/world.hpp"

#include <stdexcept>

namespace amod::world {

namespace {

// One dynamics step for a single vehicle. Fires, in this order: pickup,
// in-transit decrement, movement start, dropoff shift, waiting increments.
// Movement starts in the same step as a pickup (target switches from origin
// to destination), but not in the same step as a dropoff.
void advance_vehicle(Vehicle& vehicle, int vehicle_index, const ZoneGraph& graph,
                     const PricingModel& prices, int max_wait, StepOutcome& out) {
  if (vehicle.slot1 && vehicle.arrival_countdown == 0 &&
      vehicle.position == vehicle.slot1->origin && vehicle.slot1->waiting_time) {
    const int wait = *vehicle.slot1->waiting_time;
    vehicle.slot1->waiting_time.reset();
    const double booked =
        wait <= max_wait ? prices.revenue_rate * vehicle.slot1->trip_distance : 0.0;
    out.revenue += booked;
    out.events.push_back({StepEvent::Kind::kPickup, vehicle_index,
                          vehicle.position, vehicle.position, booked});
  }

  if (vehicle.arrival_countdown > 0) {
    --vehicle.arrival_countdown;
  } else if (vehicle.slot1) {
    const NodeId target = vehicle.slot1->waiting_time ? vehicle.slot1->origin
                                                      : vehicle.slot1->destination;
    if (vehicle.position != target) {
      const NodeId hop = graph.next_hop(vehicle.position, target);
      const double leg_cost = prices.cost_rate * graph.edge_distance(vehicle.position, hop);
      out.cost += leg_cost;
      out.events.push_back({StepEvent::Kind::kMoveStart, vehicle_index,
                            vehicle.position, hop, leg_cost});
      vehicle.arrival_countdown = graph.edge_time(vehicle.position, hop) - 1;
      vehicle.position = hop;
    }
  }

  if (vehicle.slot1 && vehicle.slot1->picked_up() && vehicle.arrival_countdown == 0 &&
      vehicle.position == vehicle.slot1->destination) {
    out.events.push_back({StepEvent::Kind::kDropoff, vehicle_index,
                          vehicle.position, vehicle.position, 0.0});
    vehicle.slot1 = vehicle.slot2;
    vehicle.slot2.reset();
  }

  if (vehicle.slot1 && vehicle.slot1->waiting_time) ++*vehicle.slot1->waiting_time;
  if (vehicle.slot2 && vehicle.slot2->waiting_time) ++*vehicle.slot2->waiting_time;
}

void advance_fleet(std::vector<Vehicle>& fleet, const ZoneGraph& graph,
                   const PricingModel& prices, int max_wait, StepOutcome& out) {
  for (std::size_t j = 0; j < fleet.size(); ++j) {
    advance_vehicle(fleet[j], static_cast<int>(j), graph, prices, max_wait, out);
  }
  out.profit = out.revenue - out.cost;
}

bool fleet_busy(const std::vector<Vehicle>& fleet) {
  for (const Vehicle& vehicle : fleet) {
    if (vehicle.slot1) return true;
  }
  return false;
}

}  // namespace

Request make_request(const ZoneGraph& graph, NodeId origin, NodeId destination,
                     int placement_step, int waiting_time) {
  if (origin == destination) throw std::invalid_argument("request: origin == destination");
  Request request;
  request.waiting_time = waiting_time;
  request.origin = origin;
  request.destination = destination;
  request.placement_step = placement_step;
  request.trip_distance = graph.distance_km(origin, destination);
  return request;
}

ActionCheck validate_action(const SystemState& state, const ActionVector& action) {
  if (action.size() != state.new_requests.size()) {
    return {false, true, "action length does not match request count"};
  }
  const int fleet_size = static_cast<int>(state.fleet.size());
  std::vector<char> used(state.fleet.size(), 0);
  for (std::size_t i = 0; i < action.size(); ++i) {
    const int decision = action[i];
    if (decision == kReject) continue;
    if (decision < 0 || decision >= fleet_size) {
      return {false, true, "vehicle index out of range"};
    }
    if (!state.fleet[decision].has_free_slot()) {
      return {false, false, "slot occupied"};
    }
    if (used[decision]) {
      return {false, false, "vehicle multiply assigned"};
    }
    used[decision] = 1;
  }
  return {};
}

SystemState apply_assignments(const SystemState& state, const ActionVector& action) {
  const ActionCheck check = validate_action(state, action);
  if (!check.ok) throw std::invalid_argument("invalid action: " + check.violation);
  SystemState post = state;
  for (std::size_t i = 0; i < action.size(); ++i) {
    if (action[i] == kReject) continue;
    Vehicle& vehicle = post.fleet[action[i]];
    if (!vehicle.slot1) {
      vehicle.slot1 = state.new_requests[i];
    } else {
      vehicle.slot2 = state.new_requests[i];
    }
  }
  post.new_requests.clear();
  return post;
}

StepOutcome step_profit(const SystemState& post_state, const ZoneGraph& graph,
                        const PricingModel& prices, int max_wait) {
  StepOutcome out;
  std::vector<Vehicle> fleet = post_state.fleet;
  advance_fleet(fleet, graph, prices, max_wait, out);
  return out;
}

SystemState advance_dynamics(const SystemState& post_state,
                             const std::vector<Request>& incoming,
                             const ZoneGraph& graph, const PricingModel& prices,
                             int max_wait, StepOutcome* outcome) {
  SystemState next = post_state;
  StepOutcome out;
  advance_fleet(next.fleet, graph, prices, max_wait, out);
  next.new_requests = incoming;
  next.t = post_state.t + 1;
  if (outcome) *outcome = out;
  return next;
}

StepResult step(const SystemState& state, const ActionVector& action,
                const std::vector<Request>& incoming, const ZoneGraph& graph,
                const PricingModel& prices, const EpisodeConfig& config) {
  const SystemState post = apply_assignments(state, action);
  StepResult result;
  result.next = advance_dynamics(post, incoming, graph, prices, config.max_wait,
                                 &result.outcome);
  result.reward = result.outcome.profit;
  return result;
}

double run_out(const SystemState& state, const ZoneGraph& graph,
               const PricingModel& prices, const EpisodeConfig& config,
               StepOutcome* accumulated) {
  SystemState current = state;
  current.new_requests.clear();
  StepOutcome total;
  // Every committed trip finishes within a bounded number of steps.
  const int safety_cap =
      (graph.time_diameter() + 1) * 6 + config.max_wait + config.horizon + 64;
  int steps = 0;
  while (fleet_busy(current.fleet)) {
    StepOutcome out;
    current = advance_dynamics(current, {}, graph, prices, config.max_wait, &out);
    total.revenue += out.revenue;
    total.cost += out.cost;
    total.events.insert(total.events.end(), out.events.begin(), out.events.end());
    if (++steps > safety_cap) throw std::logic_error("run_out did not terminate");
  }
  total.profit = total.revenue - total.cost;
  if (accumulated) *accumulated = total;
  return total.profit;
}

bool can_serve_within_deadline(const Vehicle& vehicle, const Request& request,
                               const ZoneGraph& graph, int max_wait) {
  if (!vehicle.has_free_slot()) return false;
  static const PricingModel unit_prices;
  const ServiceEstimate estimate =
      deterministic_service_profit(vehicle, request, graph, unit_prices, max_wait);
  return estimate.feasible;
}

ServiceEstimate deterministic_service_profit(const Vehicle& vehicle,
                                             const Request& request,
                                             const ZoneGraph& graph,
                                             const PricingModel& prices,
                                             int max_wait) {
  if (!vehicle.has_free_slot()) {
    throw std::invalid_argument("deterministic_service_profit: no free slot");
  }
  Vehicle simulated = vehicle;
  if (!simulated.slot1) {
    simulated.slot1 = request;
  } else {
    simulated.slot2 = request;
  }

  // Track which request currently occupies slot1 so movement costs are
  // attributed to the right agent: the deadhead toward the new request's
  // origin begins only once it reaches slot1.
  const bool starts_in_slot2 = vehicle.slot1.has_value();
  bool tracked_in_slot1 = !starts_in_slot2;

  ServiceEstimate estimate;
  double attributed_cost = 0.0;
  double booked_revenue = 0.0;
  const int safety_cap = (graph.time_diameter() + 1) * 6 + max_wait + 64;
  for (int step_count = 0;; ++step_count) {
    if (step_count > safety_cap) {
      throw std::logic_error("deterministic_service_profit did not terminate");
    }
    StepOutcome out;
    const bool tracked_waiting = tracked_in_slot1 && simulated.slot1 &&
                                 simulated.slot1->waiting_time.has_value();
    const int wait_before = tracked_waiting ? *simulated.slot1->waiting_time : 0;
    advance_vehicle(simulated, 0, graph, prices, max_wait, out);
    if (tracked_in_slot1) {
      attributed_cost += out.cost;
      // The tracked request is always the last in the queue, so only its own
      // pickup can book revenue while it sits in slot1. A one-step edge can
      // make pickup and dropoff coincide, hence the empty-slot1 alternative.
      if (tracked_waiting && (!simulated.slot1 || simulated.slot1->picked_up())) {
        estimate.pickup_wait = wait_before;
        booked_revenue = out.revenue;
      }
      if (!simulated.slot1) break;  // dropped off
    } else if (!simulated.slot2) {
      // Preexisting request finished this step; its dropoff step incurs no
      // movement, so no cost is misattributed. From the next step on the
      // vehicle serves the tracked request.
      tracked_in_slot1 = true;
    }
  }

  estimate.feasible = estimate.pickup_wait <= max_wait;
  estimate.profit = booked_revenue - attributed_cost;
  return estimate;
}

std::pair<int, NodeId> committed_completion(const Vehicle& vehicle, const ZoneGraph& graph) {
  int steps = vehicle.arrival_countdown;
  NodeId at = vehicle.position;
  if (vehicle.slot1) {
    const Request& r = *vehicle.slot1;
    if (!r.picked_up()) {
      steps += graph.travel_time(at, r.origin);
      at = r.origin;
    }
    steps += graph.travel_time(at, r.destination);
    at = r.destination;
  }
  if (vehicle.slot2) {
    const Request& r = *vehicle.slot2;
    steps += graph.travel_time(at, r.origin) + graph.travel_time(r.origin, r.destination);
    at = r.destination;
  }
  return {steps, at};
}

std::vector<Vehicle> place_fleet_uniform(const ZoneGraph& graph, int fleet_size,
                                         Rng& rng) {
  std::vector<Vehicle> fleet(fleet_size);
  for (Vehicle& vehicle : fleet) {
    vehicle.position = static_cast<NodeId>(rng.uniform_int(graph.node_count()));
  }
  return fleet;
}

}  // namespace amod::world
