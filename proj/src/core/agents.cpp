#include "core/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace amod::agents {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Tape::Ref affine_relu(Tape& tape, const TapedParams& params, const std::string& layer,
                      Tape::Ref input) {
  return tape.relu(tape.add_col_broadcast(tape.matmul(params.at(layer + "/W"), input),
                                          params.at(layer + "/b")));
}

// beta_i * e_i for every column, with beta_i = sigmoid(w . tanh(W e_i)).
Tape::Ref attention_terms(Tape& tape, const TapedParams& params, const std::string& name,
                          Tape::Ref embeddings) {
  Tape::Ref hidden = tape.tanh_op(tape.matmul(params.at(name + "/W"), embeddings));
  Tape::Ref beta = tape.sigmoid(tape.matmul(params.at(name + "/w"), hidden));
  return tape.scale_cols(embeddings, beta);
}

Tape::Ref trunk_and_head(Tape& tape, const TapedParams& params,
                         const ArchitectureConfig& arch, Tape::Ref input,
                         bool softmax_head) {
  Tape::Ref h = input;
  for (std::size_t layer = 0; layer < arch.trunk_widths.size(); ++layer) {
    h = affine_relu(tape, params, "trunk" + std::to_string(layer), h);
  }
  Tape::Ref logits = tape.add_col_broadcast(tape.matmul(params.at("out/W"), h),
                                            params.at("out/b"));
  return softmax_head ? tape.softmax_cols(logits) : logits;
}

void add_affine(ParameterSet& params, const std::string& name, int out_dim, int in_dim,
                Rng& rng) {
  params.add(name + "/W", neural::glorot_uniform(out_dim, in_dim, rng));
  params.add(name + "/b", Mat::Zero(out_dim, 1));
}

ParameterSet build_network(const ArchitectureConfig& arch, int request_input,
                           int vehicle_input, int trunk_input, Rng& rng) {
  ParameterSet params;
  add_affine(params, "req_embed", arch.embedding_dim, request_input, rng);
  add_affine(params, "veh_embed", arch.embedding_dim, vehicle_input, rng);
  params.add("req_attn/W",
             neural::glorot_uniform(arch.request_attention_dim, arch.embedding_dim, rng));
  params.add("req_attn/w", neural::glorot_uniform(1, arch.request_attention_dim, rng));
  params.add("veh_attn/W",
             neural::glorot_uniform(arch.vehicle_attention_dim, arch.embedding_dim, rng));
  params.add("veh_attn/w", neural::glorot_uniform(1, arch.vehicle_attention_dim, rng));
  int width_in = trunk_input;
  for (std::size_t layer = 0; layer < arch.trunk_widths.size(); ++layer) {
    add_affine(params, "trunk" + std::to_string(layer), arch.trunk_widths[layer], width_in,
               rng);
    width_in = arch.trunk_widths[layer];
  }
  add_affine(params, "out", 2, width_in, rng);
  return params;
}

}  // namespace

NormalizationConstants NormalizationConstants::from(const world::ZoneGraph& graph,
                                                    const world::EpisodeConfig& config,
                                                    std::vector<double> profile) {
  NormalizationConstants norms;
  norms.min_x = graph.min_x();
  norms.max_x = graph.max_x();
  norms.min_y = graph.min_y();
  norms.max_y = graph.max_y();
  norms.distance_scale = std::max(graph.diameter_km(), 1e-9);
  // Worst committed workloads span roughly two trips plus a deadhead; twice
  // the time diameter covers the common range, the feature clamps the rest.
  norms.tau_cap = std::max(1, 2 * graph.time_diameter());
  norms.horizon = config.horizon;
  norms.fleet_size = config.fleet_size;
  norms.demand_profile = std::move(profile);
  return norms;
}

double NormalizationConstants::norm_x(double x) const {
  const double span = max_x - min_x;
  return span > 0.0 ? clamp01((x - min_x) / span) : 0.5;
}

double NormalizationConstants::norm_y(double y) const {
  const double span = max_y - min_y;
  return span > 0.0 ? clamp01((y - min_y) / span) : 0.5;
}

ParameterSet build_actor_params(const ArchitectureConfig& arch, Rng& rng) {
  return build_network(arch, 5, 4, arch.actor_trunk_input(), rng);
}

ParameterSet build_critic_params(const ArchitectureConfig& arch, Rng& rng) {
  // Non-own encodings carry action annotations: +1 accept flag for requests,
  // +4 OD coordinates for vehicles.
  return build_network(arch, 6, 8, arch.critic_trunk_input(), rng);
}

EncodedState encode_state(const world::SystemState& state, const world::ZoneGraph& graph,
                          const NormalizationConstants& norms, int max_wait,
                          int observed_requests) {
  EncodedState encoded;
  const int R = static_cast<int>(state.new_requests.size());
  const int K = static_cast<int>(state.fleet.size());
  encoded.num_requests = R;
  encoded.num_vehicles = K;

  encoded.request_features = Mat(5, R);
  for (int i = 0; i < R; ++i) {
    const world::Request& r = state.new_requests[i];
    const auto& o = graph.nodes()[r.origin];
    const auto& d = graph.nodes()[r.destination];
    encoded.request_features(0, i) = norms.norm_x(o.x);
    encoded.request_features(1, i) = norms.norm_y(o.y);
    encoded.request_features(2, i) = norms.norm_x(d.x);
    encoded.request_features(3, i) = norms.norm_y(d.y);
    encoded.request_features(4, i) = clamp01(r.trip_distance / norms.distance_scale);
  }

  encoded.vehicle_features = Mat(4, K);
  encoded.vehicle_full.resize(K);
  double fleet_busy = 0.0;
  std::vector<int> free_in(K);
  for (int j = 0; j < K; ++j) {
    const world::Vehicle& v = state.fleet[j];
    const auto [steps, node] = world::committed_completion(v, graph);
    free_in[j] = steps;
    fleet_busy += steps;
    const auto& n = graph.nodes()[node];
    encoded.vehicle_features(0, j) = norms.norm_x(n.x);
    encoded.vehicle_features(1, j) = norms.norm_y(n.y);
    encoded.vehicle_features(2, j) = clamp01(steps / norms.tau_cap);
    encoded.vehicle_features(3, j) = v.assigned_count() / 2.0;
    encoded.vehicle_full[j] = !v.has_free_slot();
  }

  const double time_feature = clamp01(static_cast<double>(state.t) / norms.horizon);
  const double busyness =
      clamp01(fleet_busy / (std::max(1, K) * norms.tau_cap));
  double demand_feature = 0.5;
  if (!norms.demand_profile.empty()) {
    const int slot = std::min<int>(state.t, static_cast<int>(norms.demand_profile.size()) - 1);
    const double average = std::max(norms.demand_profile[slot], 1e-9);
    demand_feature = std::min(observed_requests / average, 2.0) / 2.0;
  }

  encoded.context_features = Mat(4, R * K);
  encoded.agent_request.resize(static_cast<std::size_t>(R) * K);
  encoded.agent_vehicle.resize(static_cast<std::size_t>(R) * K);
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < K; ++j) {
      const int n = i * K + j;
      encoded.agent_request[n] = i;
      encoded.agent_vehicle[n] = j;
      encoded.context_features(0, n) = time_feature;
      encoded.context_features(1, n) =
          world::can_serve_within_deadline(state.fleet[j], state.new_requests[i], graph,
                                           max_wait)
              ? 1.0
              : 0.0;
      encoded.context_features(2, n) = busyness;
      encoded.context_features(3, n) = demand_feature;
    }
  }
  return encoded;
}

ActionAnnotations annotate_action(const world::SystemState& state,
                                  const world::ActionVector& action,
                                  const world::ZoneGraph& graph,
                                  const NormalizationConstants& norms) {
  const int R = static_cast<int>(state.new_requests.size());
  const int K = static_cast<int>(state.fleet.size());
  if (static_cast<int>(action.size()) != R) {
    throw std::invalid_argument("annotate_action: action length mismatch");
  }
  ActionAnnotations ann;
  ann.request_flags = Mat::Zero(1, R);
  ann.vehicle_od = Mat::Zero(4, K);
  for (int i = 0; i < R; ++i) {
    if (action[i] == world::kReject) continue;
    const int j = action[i];
    ann.request_flags(0, i) = 1.0;
    const world::Request& r = state.new_requests[i];
    const auto& o = graph.nodes()[r.origin];
    const auto& d = graph.nodes()[r.destination];
    ann.vehicle_od(0, j) = norms.norm_x(o.x);
    ann.vehicle_od(1, j) = norms.norm_y(o.y);
    ann.vehicle_od(2, j) = norms.norm_x(d.x);
    ann.vehicle_od(3, j) = norms.norm_y(d.y);
  }
  return ann;
}

Tape::Ref TapedParams::at(const std::string& name) const {
  const auto it = refs.find(name);
  if (it == refs.end()) throw std::invalid_argument("TapedParams: missing " + name);
  return it->second;
}

TapedParams stage_params(Tape& tape, const ParameterSet& params, bool trainable) {
  TapedParams staged;
  for (const auto& [name, value] : params.tensors()) {
    staged.refs.emplace(name, trainable ? tape.param(value) : tape.input(value));
  }
  return staged;
}

Tape::Ref actor_probs(Tape& tape, const TapedParams& params,
                      const ArchitectureConfig& arch, const EncodedState& encoded) {
  const int N = encoded.num_agents();
  if (N == 0) return tape.input(Mat(2, 0));

  Tape::Ref req_in = tape.input(encoded.request_features);
  Tape::Ref veh_in = tape.input(encoded.vehicle_features);
  Tape::Ref req_embed = affine_relu(tape, params, "req_embed", req_in);
  Tape::Ref veh_embed = affine_relu(tape, params, "veh_embed", veh_in);

  Tape::Ref req_context =
      tape.repeat_cols(tape.rowsum(attention_terms(tape, params, "req_attn", req_embed)), N);
  Tape::Ref veh_context =
      tape.repeat_cols(tape.rowsum(attention_terms(tape, params, "veh_attn", veh_embed)), N);

  Tape::Ref own_req = tape.gather_cols(req_embed, encoded.agent_request);
  Tape::Ref own_veh = tape.gather_cols(veh_embed, encoded.agent_vehicle);
  Tape::Ref context = tape.input(encoded.context_features);

  const Tape::Ref parts[] = {req_context, veh_context, own_req, own_veh, context};
  return trunk_and_head(tape, params, arch, tape.vconcat(parts), /*softmax_head=*/true);
}

Tape::Ref critic_q(Tape& tape, const TapedParams& params,
                   const ArchitectureConfig& arch, const EncodedState& encoded,
                   const ActionAnnotations& annotations) {
  const int N = encoded.num_agents();
  if (N == 0) return tape.input(Mat(2, 0));
  const int R = encoded.num_requests;
  const int K = encoded.num_vehicles;

  Tape::Ref req_raw = tape.input(encoded.request_features);
  Tape::Ref veh_raw = tape.input(encoded.vehicle_features);
  const Tape::Ref req_parts[] = {req_raw, tape.input(annotations.request_flags)};
  const Tape::Ref veh_parts[] = {veh_raw, tape.input(annotations.vehicle_od)};
  Tape::Ref req_embed = affine_relu(tape, params, "req_embed", tape.vconcat(req_parts));
  Tape::Ref veh_embed = affine_relu(tape, params, "veh_embed", tape.vconcat(veh_parts));

  // Per-entity leave-one-out contexts: the full attention sum minus the own
  // entity's term, so each agent never sees its own (annotated) entities.
  Tape::Ref req_terms = attention_terms(tape, params, "req_attn", req_embed);
  Tape::Ref veh_terms = attention_terms(tape, params, "veh_attn", veh_embed);
  Tape::Ref req_context = tape.gather_cols(
      tape.sub(tape.repeat_cols(tape.rowsum(req_terms), R), req_terms),
      encoded.agent_request);
  Tape::Ref veh_context = tape.gather_cols(
      tape.sub(tape.repeat_cols(tape.rowsum(veh_terms), K), veh_terms),
      encoded.agent_vehicle);

  Tape::Ref own_req = tape.gather_cols(req_raw, encoded.agent_request);
  Tape::Ref own_veh = tape.gather_cols(veh_raw, encoded.agent_vehicle);
  Tape::Ref context = tape.input(encoded.context_features);

  const Tape::Ref parts[] = {req_context, veh_context, own_req, own_veh, context};
  return trunk_and_head(tape, params, arch, tape.vconcat(parts), /*softmax_head=*/false);
}

Mat actor_probs_mat(const ParameterSet& params, const ArchitectureConfig& arch,
                    const EncodedState& encoded) {
  Tape tape;
  const TapedParams staged = stage_params(tape, params, /*trainable=*/false);
  return tape.value(actor_probs(tape, staged, arch, encoded));
}

Mat critic_q_mat(const ParameterSet& params, const ArchitectureConfig& arch,
                 const EncodedState& encoded, const ActionAnnotations& annotations) {
  Tape tape;
  const TapedParams staged = stage_params(tape, params, /*trainable=*/false);
  return tape.value(critic_q(tape, staged, arch, encoded, annotations));
}

PostProcessOutcome post_process(double p_reject, double p_accept, bool vehicle_full,
                                DecisionMode mode, Rng& rng) {
  if (vehicle_full) {
    p_reject = 1.0;
    p_accept = 0.0;
  }
  PostProcessOutcome outcome;
  if (mode == DecisionMode::kTrain) {
    outcome.delta = rng.bernoulli(p_accept) ? 1 : 0;
  } else {
    outcome.delta = p_reject >= p_accept ? 0 : 1;
  }
  outcome.score = outcome.delta == 1 ? p_accept : 0.0;
  return outcome;
}

DecisionOutcome decide(const ParameterSet& actor, const ArchitectureConfig& arch,
                       const world::SystemState& state, const world::ZoneGraph& graph,
                       const NormalizationConstants& norms, int max_wait,
                       int observed_requests, DecisionMode mode, Rng& rng) {
  DecisionOutcome outcome;
  const int R = static_cast<int>(state.new_requests.size());
  const int K = static_cast<int>(state.fleet.size());
  outcome.action.assign(R, world::kReject);
  if (R == 0) {
    outcome.probs = Mat(2, 0);
    return outcome;
  }

  const EncodedState encoded = encode_state(state, graph, norms, max_wait, observed_requests);
  outcome.probs = actor_probs_mat(actor, arch, encoded);
  outcome.deltas.resize(encoded.num_agents());
  outcome.scores.resize(encoded.num_agents());

  matching::ScoredBipartiteGraph bipartite;
  bipartite.num_requests = R;
  bipartite.num_vehicles = K;
  for (int n = 0; n < encoded.num_agents(); ++n) {
    const int i = encoded.agent_request[n];
    const int j = encoded.agent_vehicle[n];
    const PostProcessOutcome agent = post_process(
        outcome.probs(0, n), outcome.probs(1, n), encoded.vehicle_full[j], mode, rng);
    outcome.deltas[n] = agent.delta;
    outcome.scores[n] = agent.score;
    if (agent.score > 0.0) {
      bipartite.edges.push_back({i, j, agent.score});
    }
  }

  outcome.assignment = matching::solve_matching(bipartite);
  for (const auto& [i, j] : outcome.assignment.pairs) {
    outcome.action[i] = j;
  }
  return outcome;
}

Mat per_agent_rewards(const world::SystemState& state, const matching::Assignment& assignment,
                      const world::ZoneGraph& graph, const world::PricingModel& prices,
                      int max_wait) {
  const int R = static_cast<int>(state.new_requests.size());
  const int K = static_cast<int>(state.fleet.size());
  Mat rewards = Mat::Zero(R, K);
  for (const auto& [i, j] : assignment.pairs) {
    rewards(i, j) = world::deterministic_service_profit(state.fleet[j], state.new_requests[i],
                                                        graph, prices, max_wait)
                        .profit;
  }
  return rewards;
}

Mat per_agent_rewards(const world::SystemState& state, const world::ActionVector& action,
                      const world::ZoneGraph& graph, const world::PricingModel& prices,
                      int max_wait) {
  matching::Assignment assignment;
  for (int i = 0; i < static_cast<int>(action.size()); ++i) {
    if (action[i] != world::kReject) assignment.pairs.emplace_back(i, action[i]);
  }
  return per_agent_rewards(state, assignment, graph, prices, max_wait);
}

std::string decision_to_json(const DecisionOutcome& outcome, int num_requests,
                             int num_vehicles) {
  nlohmann::json doc;
  doc["num_requests"] = num_requests;
  doc["num_vehicles"] = num_vehicles;
  doc["action"] = outcome.action;
  doc["total_matched_weight"] = outcome.assignment.total_weight;
  auto& agents = doc["agents"];
  agents = nlohmann::json::array();
  for (int i = 0; i < num_requests; ++i) {
    for (int j = 0; j < num_vehicles; ++j) {
      const int n = i * num_vehicles + j;
      agents.push_back({{"request", i},
                        {"vehicle", j},
                        {"p_reject", outcome.probs(0, n)},
                        {"p_accept", outcome.probs(1, n)},
                        {"delta", outcome.deltas[n]},
                        {"score", outcome.scores[n]}});
    }
  }
  return doc.dump(2);
}

}  // namespace amod::agents
