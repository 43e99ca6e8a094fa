#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/rng.hpp"

namespace amod::world {

// Trip demand unit. waiting_time counts whole steps since placement and is
// absent exactly from pickup onward.
struct Request {
  std::optional<int> waiting_time = 0;
  NodeId origin = 0;
  NodeId destination = 0;
  int placement_step = 0;
  double trip_distance = 0.0;

  bool picked_up() const { return !waiting_time.has_value(); }
  bool operator==(const Request&) const = default;
};

Request make_request(const ZoneGraph& graph, NodeId origin, NodeId destination,
                     int placement_step, int waiting_time = 0);

// Fleet unit. position is the current node when arrival_countdown == 0, else
// the next node reached in arrival_countdown steps. slot2 occupied implies
// slot1 occupied.
struct Vehicle {
  NodeId position = 0;
  int arrival_countdown = 0;
  std::optional<Request> slot1;
  std::optional<Request> slot2;

  bool has_free_slot() const { return !slot2.has_value(); }
  int assigned_count() const {
    return (slot1 ? 1 : 0) + (slot2 ? 1 : 0);
  }
  bool operator==(const Vehicle&) const = default;
};

struct SystemState {
  int t = 0;
  std::vector<Request> new_requests;
  std::vector<Vehicle> fleet;

  bool operator==(const SystemState&) const = default;
};

// Per-request decision: kReject or a 0-based vehicle index.
inline constexpr int kReject = -1;
using ActionVector = std::vector<int>;

struct PricingModel {
  double revenue_rate = 5.0;  // USD per km
  double cost_rate = 4.5;     // USD per km
};

struct EpisodeConfig {
  int horizon = 60;
  int max_wait = 5;
  int fleet_size = 1;
};

struct StepEvent {
  enum class Kind { kPickup, kDropoff, kMoveStart };
  Kind kind;
  int vehicle = 0;
  NodeId from = -1;
  NodeId to = -1;
  double amount = 0.0;  // booked revenue for pickups, cost for move starts
};

struct StepOutcome {
  double revenue = 0.0;
  double cost = 0.0;
  double profit = 0.0;
  std::vector<StepEvent> events;
};

struct ActionCheck {
  bool ok = true;
  bool structural = false;
  std::string violation;
};

// Checks the per-step feasibility constraints: slot availability and at most
// one new request per vehicle. A length mismatch or an out-of-range vehicle
// index is reported as structural rather than a constraint violation.
ActionCheck validate_action(const SystemState& state, const ActionVector& action);

// Pre-decision -> post-decision: assigned requests enter vehicle slots,
// rejected requests leave the system. Throws on an invalid action; no partial
// application.
SystemState apply_assignments(const SystemState& state, const ActionVector& action);

// Revenue/cost that the post-decision state triggers, evaluated without
// mutating it.
StepOutcome step_profit(const SystemState& post_state, const ZoneGraph& graph,
                        const PricingModel& prices, int max_wait);

// Post-decision -> next pre-decision state. Per vehicle, in fixed order:
// pickup, in-transit decrement, movement start, dropoff shift, waiting-time
// increments; then the new requests arrive and t advances.
SystemState advance_dynamics(const SystemState& post_state,
                             const std::vector<Request>& incoming,
                             const ZoneGraph& graph, const PricingModel& prices,
                             int max_wait, StepOutcome* outcome = nullptr);

struct StepResult {
  double reward = 0.0;
  SystemState next;
  StepOutcome outcome;
};

StepResult step(const SystemState& state, const ActionVector& action,
                const std::vector<Request>& incoming, const ZoneGraph& graph,
                const PricingModel& prices, const EpisodeConfig& config);

// Simulates past the horizon with no new requests or assignments until every
// committed trip is dropped off; returns the profit accumulated on the way.
double run_out(const SystemState& state, const ZoneGraph& graph,
               const PricingModel& prices, const EpisodeConfig& config,
               StepOutcome* accumulated = nullptr);

// True iff the deterministic pickup wait of `request`, were it assigned to
// `vehicle` now, stays within max_wait. False when the vehicle has no free
// slot.
bool can_serve_within_deadline(const Vehicle& vehicle, const Request& request,
                               const ZoneGraph& graph, int max_wait);

struct ServiceEstimate {
  double profit = 0.0;
  int pickup_wait = 0;
  bool feasible = false;  // pickup_wait <= max_wait
};

// Exact profit this vehicle would realize for the request: revenue iff the
// simulated pickup wait meets the deadline, minus the cost of the deadhead
// and trip legs. Computed by forward simulation of the committed route, so it
// matches the environment to the last cent. Requires a free slot.
ServiceEstimate deterministic_service_profit(const Vehicle& vehicle,
                                             const Request& request,
                                             const ZoneGraph& graph,
                                             const PricingModel& prices,
                                             int max_wait);

// Steps until the vehicle has finished all committed work and the node where
// it ends up, following the same canonical routes as the dynamics.
std::pair<int, NodeId> committed_completion(const Vehicle& vehicle, const ZoneGraph& graph);

std::vector<Vehicle> place_fleet_uniform(const ZoneGraph& graph, int fleet_size,
                                         Rng& rng);

}  // namespace amod::world
