#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/matching.hpp"
#include "core/nn.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "core/world.hpp"

namespace amod::agents {

using neural::Mat;
using neural::ParameterSet;
using neural::Tape;

// Scales that map raw state quantities into [0, 1] feature components. All
// derived once per experiment from the graph and episode configuration so
// that features are stable across episodes and checkpoints.
struct NormalizationConstants {
  double min_x = 0.0, max_x = 1.0;
  double min_y = 0.0, max_y = 1.0;
  double distance_scale = 1.0;  // graph diameter (km)
  double tau_cap = 1.0;         // time-diameter + max trip time (steps)
  int horizon = 60;
  int fleet_size = 1;
  std::vector<double> demand_profile;  // mean cumulative requests per step

  static NormalizationConstants from(const world::ZoneGraph& graph,
                                     const world::EpisodeConfig& config,
                                     std::vector<double> profile);

  double norm_x(double x) const;
  double norm_y(double y) const;
};

// Layer widths; the defaults mirror the full-scale networks, tests shrink
// them. Trunk layers all use ReLU; the actor head is a 2-way softmax and the
// critic head is linear 2-dim.
struct ArchitectureConfig {
  int embedding_dim = 32;
  int request_attention_dim = 256;
  int vehicle_attention_dim = 128;
  std::vector<int> trunk_widths = {1024, 512, 128, 32, 8};

  int actor_trunk_input() const { return 4 * embedding_dim + 4; }
  int critic_trunk_input() const { return 2 * embedding_dim + 5 + 4 + 4; }
};

ParameterSet build_actor_params(const ArchitectureConfig& arch, Rng& rng);
ParameterSet build_critic_params(const ArchitectureConfig& arch, Rng& rng);

// Agent grid flattening: agent (request i, vehicle j) lives at column i*K + j.
struct EncodedState {
  int num_requests = 0;
  int num_vehicles = 0;
  Mat request_features;  // 5 x R
  Mat vehicle_features;  // 4 x K
  Mat context_features;  // 4 x (R*K)
  std::vector<int> agent_request;  // per agent column: its request index
  std::vector<int> agent_vehicle;  // per agent column: its vehicle index
  std::vector<bool> vehicle_full;  // r2 occupied

  int num_agents() const { return num_requests * num_vehicles; }
};

// observed_requests = cumulative request count placed in this episode up to
// and including the current step (for the demand-so-far feature).
EncodedState encode_state(const world::SystemState& state, const world::ZoneGraph& graph,
                          const NormalizationConstants& norms, int max_wait,
                          int observed_requests);

// Action annotations attached to the critic's non-own entity encodings.
struct ActionAnnotations {
  Mat request_flags;  // 1 x R: 1 if the request was assigned to any vehicle
  Mat vehicle_od;     // 4 x K: normalized OD of the newly assigned request, zeros otherwise
};

ActionAnnotations annotate_action(const world::SystemState& state,
                                  const world::ActionVector& action,
                                  const world::ZoneGraph& graph,
                                  const NormalizationConstants& norms);

// Parameter tensors staged onto a tape; trainable staging creates grad-tracked
// leaves so losses can read gradients back by name.
struct TapedParams {
  std::map<std::string, Tape::Ref> refs;

  Tape::Ref at(const std::string& name) const;
};

TapedParams stage_params(Tape& tape, const ParameterSet& params, bool trainable);

// Actor forward over every agent of the state: 2 x (R*K) probabilities, row 0
// reject, row 1 accept. Empty request set yields a 2 x 0 matrix.
Tape::Ref actor_probs(Tape& tape, const TapedParams& params,
                      const ArchitectureConfig& arch, const EncodedState& encoded);

// Centralized critic over every agent: 2 x (R*K) action values. Non-own
// entities carry the annotations; the agent's own request and vehicle are
// excluded from the attention contexts and fed raw to the trunk.
Tape::Ref critic_q(Tape& tape, const TapedParams& params,
                   const ArchitectureConfig& arch, const EncodedState& encoded,
                   const ActionAnnotations& annotations);

// Inference wrappers (no gradient bookkeeping).
Mat actor_probs_mat(const ParameterSet& params, const ArchitectureConfig& arch,
                    const EncodedState& encoded);
Mat critic_q_mat(const ParameterSet& params, const ArchitectureConfig& arch,
                 const EncodedState& encoded, const ActionAnnotations& annotations);

enum class DecisionMode { kTrain, kTest };

struct PostProcessOutcome {
  int delta = 0;     // 0 reject, 1 accept
  double score = 0.0;
};

// Algorithm-1 post-processing of one agent's (p_r, p_a): full vehicles are
// forced to reject; train mode samples, test mode takes the argmax with ties
// resolved toward rejection; the score is the accept probability when
// accepted.
PostProcessOutcome post_process(double p_reject, double p_accept, bool vehicle_full,
                                DecisionMode mode, Rng& rng);

struct DecisionOutcome {
  world::ActionVector action;
  Mat probs;                  // 2 x (R*K) actor outputs
  std::vector<int> deltas;    // per agent
  std::vector<double> scores; // per agent
  matching::Assignment assignment;
};

// Full per-step decision: actor forward, per-agent post-processing, weighted
// matching over positive scores, and translation into an ActionVector that
// satisfies Eq.-style feasibility by construction.
DecisionOutcome decide(const ParameterSet& actor, const ArchitectureConfig& arch,
                       const world::SystemState& state, const world::ZoneGraph& graph,
                       const NormalizationConstants& norms, int max_wait,
                       int observed_requests, DecisionMode mode, Rng& rng);

// Egoistic reward attribution: each matched (request, vehicle) agent receives
// the deterministic service profit of that pairing, everyone else zero.
Mat per_agent_rewards(const world::SystemState& state, const matching::Assignment& assignment,
                      const world::ZoneGraph& graph, const world::PricingModel& prices,
                      int max_wait);
Mat per_agent_rewards(const world::SystemState& state, const world::ActionVector& action,
                      const world::ZoneGraph& graph, const world::PricingModel& prices,
                      int max_wait);

// Debug dump of per-agent probabilities, deltas, and scores for one step.
std::string decision_to_json(const DecisionOutcome& outcome, int num_requests,
                             int num_vehicles);

}  // namespace amod::agents
