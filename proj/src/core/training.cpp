#include "core/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace amod::training {

namespace {

using agents::Tape;
using agents::TapedParams;

double sum_rewards(const Mat& rewards) { return rewards.sum(); }

double sumsq_rewards(const Mat& rewards) { return rewards.squaredNorm(); }

// Collects gradients recorded on the tape back into named form, with zero
// entries for parameters the loss never touched.
neural::Gradients collect_gradients(const Tape& tape, const TapedParams& staged,
                                    const ParameterSet& params) {
  neural::Gradients grads;
  grads.zero_like(params);
  for (const auto& [name, ref] : staged.refs) {
    const Mat& g = tape.grad(ref);
    if (g.size() != 0) grads.tensors[name] = g;
  }
  return grads;
}

Mat elementwise_min(const Mat& a, const Mat& b) { return a.cwiseMin(b); }

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
  storage_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::store(Transition transition) {
  reward_sum_ += sum_rewards(transition.rewards);
  reward_sumsq_ += sumsq_rewards(transition.rewards);
  reward_count_ += transition.rewards.size();
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(transition));
  } else {
    Transition& evicted = storage_[next_];
    reward_sum_ -= sum_rewards(evicted.rewards);
    reward_sumsq_ -= sumsq_rewards(evicted.rewards);
    reward_count_ -= evicted.rewards.size();
    evicted = std::move(transition);
    next_ = (next_ + 1) % capacity_;
  }
}

double ReplayBuffer::reward_sigma() const {
  if (reward_count_ == 0) return 1.0;
  const double mean = reward_sum_ / reward_count_;
  const double variance = std::max(0.0, reward_sumsq_ / reward_count_ - mean * mean);
  const double sigma = std::sqrt(variance);
  return sigma > 0.0 ? sigma : 1.0;
}

std::vector<const Transition*> ReplayBuffer::sample(Rng& rng, std::size_t batch) const {
  if (storage_.size() < batch) throw std::runtime_error("ReplayBuffer: underfull");
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (std::size_t k = 0; k < batch; ++k) {
    out.push_back(&storage_[rng.uniform_int(storage_.size())]);
  }
  return out;
}

LossResult actor_loss(std::span<const LossInput> batch, double sigma,
                      const ParameterSet& actor, const ParameterSet& critic1,
                      const ParameterSet& critic2, const ArchitectureConfig& arch,
                      const world::ZoneGraph& graph, const NormalizationConstants& norms,
                      int max_wait, const SACConfig& config) {
  (void)sigma;  // the critics already operate in normalized-reward units
  Tape tape;
  const TapedParams staged = agents::stage_params(tape, actor, /*trainable=*/true);
  Tape::Ref total{};
  for (const LossInput& input : batch) {
    const Transition& tr = *input.transition;
    const int num_agents =
        static_cast<int>(tr.s.new_requests.size() * tr.s.fleet.size());
    if (num_agents == 0) continue;
    const agents::EncodedState encoded =
        agents::encode_state(tr.s, graph, norms, max_wait, tr.observed_requests);
    const agents::ActionAnnotations ann =
        agents::annotate_action(tr.s, input.global_action, graph, norms);
    const Mat q_min = elementwise_min(agents::critic_q_mat(critic1, arch, encoded, ann),
                                      agents::critic_q_mat(critic2, arch, encoded, ann));

    Tape::Ref pi = agents::actor_probs(tape, staged, arch, encoded);
    Tape::Ref log_pi =
        tape.log_op(tape.add_const(pi, Mat::Constant(2, num_agents, 1e-12)));
    Tape::Ref inner = tape.add_const(tape.scale(log_pi, config.alpha), -q_min);
    Tape::Ref element = tape.sum(tape.cmul(pi, inner));
    total = total.valid() ? tape.add(total, element) : element;
  }

  LossResult result;
  if (total.valid()) {
    Tape::Ref loss = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
    result.value = tape.value(loss)(0, 0);
    tape.backward(loss);
    result.grads = collect_gradients(tape, staged, actor);
  } else {
    result.grads.zero_like(actor);
  }
  result.value += neural::l2_penalty(actor, config.l2_coefficient);
  neural::add_l2_gradients(actor, config.l2_coefficient, result.grads);
  return result;
}

LossResult critic_loss(std::span<const LossInput> batch, double sigma,
                       const ParameterSet& critic, const ParameterSet& target1,
                       const ParameterSet& target2, const ParameterSet& actor,
                       const ArchitectureConfig& arch, const world::ZoneGraph& graph,
                       const NormalizationConstants& norms, int max_wait,
                       const SACConfig& config) {
  Tape tape;
  const TapedParams staged = agents::stage_params(tape, critic, /*trainable=*/true);
  Tape::Ref total{};
  for (const LossInput& input : batch) {
    const Transition& tr = *input.transition;
    const int R = static_cast<int>(tr.s.new_requests.size());
    const int K = static_cast<int>(tr.s.fleet.size());
    const int num_agents = R * K;
    if (num_agents == 0) continue;

    const agents::EncodedState encoded =
        agents::encode_state(tr.s, graph, norms, max_wait, tr.observed_requests);
    const agents::ActionAnnotations ann =
        agents::annotate_action(tr.s, input.global_action, graph, norms);

    // Target values, outside the tape: y carries no gradient.
    Mat y(1, num_agents);
    Mat bootstrap = Mat::Zero(1, num_agents);
    if (!tr.done) {
      const agents::EncodedState encoded_next = agents::encode_state(
          tr.s_next, graph, norms, max_wait, tr.observed_requests_next);
      const agents::ActionAnnotations ann_next =
          agents::annotate_action(tr.s_next, input.next_global_action, graph, norms);
      const Mat pi_next = agents::actor_probs_mat(actor, arch, encoded_next);
      const Mat q_bar =
          elementwise_min(agents::critic_q_mat(target1, arch, encoded_next, ann_next),
                          agents::critic_q_mat(target2, arch, encoded_next, ann_next));
      const Mat log_pi_next = (pi_next.array() + 1e-12).log();
      bootstrap =
          (pi_next.array() * (q_bar.array() - config.alpha * log_pi_next.array()))
              .colwise()
              .sum()
              .matrix();
    }
    Mat mask = Mat::Zero(2, num_agents);
    for (int n = 0; n < num_agents; ++n) {
      const int i = n / K;
      const int j = n % K;
      y(0, n) = tr.rewards(i, j) / sigma + config.gamma * bootstrap(0, n);
      mask(input.global_action[i] == j ? 1 : 0, n) = 1.0;
    }

    Tape::Ref q = agents::critic_q(tape, staged, arch, encoded, ann);
    Tape::Ref taken = tape.colsum(tape.cmul(q, tape.input(mask)));
    Tape::Ref err = tape.add_const(taken, -y);
    Tape::Ref element = tape.huber_sum(err, config.huber_delta);
    total = total.valid() ? tape.add(total, element) : element;
  }

  LossResult result;
  if (total.valid()) {
    Tape::Ref loss = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
    result.value = tape.value(loss)(0, 0);
    tape.backward(loss);
    result.grads = collect_gradients(tape, staged, critic);
  } else {
    result.grads.zero_like(critic);
  }
  result.value += neural::l2_penalty(critic, config.l2_coefficient);
  neural::add_l2_gradients(critic, config.l2_coefficient, result.grads);
  return result;
}

void target_update(const ParameterSet& primary, ParameterSet& target, double rho) {
  for (const auto& [name, value] : primary.tensors()) {
    Mat& t = target.at(name);
    t = (1.0 - rho) * t + rho * value;
  }
}

EpisodeStats run_episode(const PolicyFn& policy, const demand::RequestStream& stream,
                         const world::ZoneGraph& graph, const world::PricingModel& prices,
                         const world::EpisodeConfig& episode, Rng& placement_rng,
                         Rng& policy_rng) {
  EpisodeStats stats;
  world::SystemState state;
  state.t = 0;
  state.fleet = world::place_fleet_uniform(graph, episode.fleet_size, placement_rng);
  if (!stream.steps.empty()) state.new_requests = stream.steps.front();
  int observed = static_cast<int>(state.new_requests.size());

  for (int t = 0; t < episode.horizon; ++t) {
    stats.total_requests += static_cast<int>(state.new_requests.size());
    const world::ActionVector action = policy(state, observed, policy_rng);
    for (int a : action) {
      if (a != world::kReject) ++stats.accepted_requests;
    }
    const std::vector<world::Request> incoming =
        t + 1 < static_cast<int>(stream.steps.size()) ? stream.steps[t + 1]
                                                      : std::vector<world::Request>{};
    world::StepResult result =
        world::step(state, action, incoming, graph, prices, episode);
    stats.profit += result.reward;
    state = std::move(result.next);
    observed += static_cast<int>(incoming.size());
  }
  stats.profit += world::run_out(state, graph, prices, episode);
  return stats;
}

world::ActionVector random_policy_action(const world::SystemState& state,
                                         const world::ZoneGraph& graph, int max_wait,
                                         Rng& rng) {
  (void)graph;
  (void)max_wait;
  const int R = static_cast<int>(state.new_requests.size());
  const int K = static_cast<int>(state.fleet.size());
  matching::ScoredBipartiteGraph bipartite;
  bipartite.num_requests = R;
  bipartite.num_vehicles = K;
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < K; ++j) {
      const agents::PostProcessOutcome agent = agents::post_process(
          0.5, 0.5, !state.fleet[j].has_free_slot(), agents::DecisionMode::kTrain, rng);
      if (agent.score > 0.0) bipartite.edges.push_back({i, j, agent.score});
    }
  }
  world::ActionVector action(R, world::kReject);
  for (const auto& [i, j] : matching::solve_matching(bipartite).pairs) {
    action[i] = j;
  }
  return action;
}

PolicyFn make_rl_policy(const ParameterSet& actor, const ArchitectureConfig& arch,
                        const world::ZoneGraph& graph, const NormalizationConstants& norms,
                        int max_wait, agents::DecisionMode mode) {
  return [actor, arch, &graph, norms, max_wait, mode](
             const world::SystemState& state, int observed, Rng& rng) {
    return agents::decide(actor, arch, state, graph, norms, max_wait, observed, mode, rng)
        .action;
  };
}

EvalResult evaluate_policy(const PolicyFn& policy,
                           std::span<const demand::RequestStream> streams,
                           const world::ZoneGraph& graph, const world::PricingModel& prices,
                           const world::EpisodeConfig& episode, std::uint64_t seed) {
  EvalResult result;
  long total = 0;
  long accepted = 0;
  for (std::size_t e = 0; e < streams.size(); ++e) {
    Rng placement_rng(seed + 0x9e3779b97f4a7c15ULL * (e + 1));
    Rng policy_rng(seed + 0xbf58476d1ce4e5b9ULL * (e + 1));
    const EpisodeStats stats =
        run_episode(policy, streams[e], graph, prices, episode, placement_rng, policy_rng);
    result.mean_profit += stats.profit;
    total += stats.total_requests;
    accepted += stats.accepted_requests;
    result.per_episode.push_back(stats);
  }
  if (!streams.empty()) result.mean_profit /= static_cast<double>(streams.size());
  result.served_share = total > 0 ? static_cast<double>(accepted) / total : 0.0;
  return result;
}

TrainResult train(const EnvironmentSpec& spec, const ArchitectureConfig& arch,
                  const SACConfig& config, std::uint64_t seed,
                  const std::function<void(const TrainMetricsRow&)>& on_metrics) {
  if (spec.graph == nullptr) throw std::invalid_argument("train: missing graph");
  if (spec.train_streams.empty()) throw std::invalid_argument("train: no training streams");
  const world::ZoneGraph& graph = *spec.graph;
  const int max_wait = spec.episode.max_wait;

  Rng init_rng(seed);
  TrainResult result;
  result.actor = agents::build_actor_params(arch, init_rng);
  result.critic1 = agents::build_critic_params(arch, init_rng);
  result.critic2 = agents::build_critic_params(arch, init_rng);
  result.target1 = result.critic1;
  result.target2 = result.critic2;

  neural::AdamState actor_opt, critic1_opt, critic2_opt;
  actor_opt.learning_rate = config.learning_rate;
  critic1_opt.learning_rate = config.learning_rate;
  critic2_opt.learning_rate = config.learning_rate;

  Rng env_rng(seed ^ 0x5851f42d4c957f2dULL);
  Rng policy_rng(seed ^ 0x14057b7ef767814fULL);
  Rng batch_rng(seed ^ 0x2545f4914f6cdd1dULL);
  const std::uint64_t validation_seed = seed ^ 0x853c49e6748fea9bULL;

  ReplayBuffer buffer(config.buffer_capacity);
  long env_step = 0;
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const auto run_validation = [&](const ParameterSet& actor) {
    const PolicyFn policy = make_rl_policy(actor, arch, graph, spec.norms, max_wait,
                                           agents::DecisionMode::kTest);
    return evaluate_policy(policy, spec.validation_streams, graph, spec.prices,
                           spec.episode, validation_seed)
        .mean_profit;
  };

  while (env_step < config.total_steps) {
    const demand::RequestStream& stream =
        spec.train_streams[env_rng.uniform_int(spec.train_streams.size())];

    world::SystemState state;
    state.t = 0;
    state.fleet = world::place_fleet_uniform(graph, spec.episode.fleet_size, env_rng);
    if (!stream.steps.empty()) state.new_requests = stream.steps.front();
    int observed = static_cast<int>(state.new_requests.size());

    for (int t = 0; t < spec.episode.horizon && env_step < config.total_steps; ++t) {
      world::ActionVector action;
      if (env_step < config.warmup_steps) {
        action = random_policy_action(state, graph, max_wait, policy_rng);
      } else {
        action = agents::decide(result.actor, arch, state, graph, spec.norms, max_wait,
                                observed, agents::DecisionMode::kTrain, policy_rng)
                     .action;
      }

      Transition transition;
      transition.s = state;
      transition.action = action;
      transition.rewards =
          agents::per_agent_rewards(state, action, graph, spec.prices, max_wait);
      transition.observed_requests = observed;

      const std::vector<world::Request> incoming =
          t + 1 < static_cast<int>(stream.steps.size()) ? stream.steps[t + 1]
                                                        : std::vector<world::Request>{};
      world::StepResult stepped =
          world::step(state, action, incoming, graph, spec.prices, spec.episode);
      observed += static_cast<int>(incoming.size());

      transition.s_next = stepped.next;
      transition.s_next.new_requests = transition.s.new_requests;
      transition.done = t + 1 == spec.episode.horizon;
      transition.observed_requests_next = observed;
      buffer.store(std::move(transition));

      state = std::move(stepped.next);
      ++env_step;

      const bool can_update = env_step > config.warmup_steps &&
                              buffer.size() >= static_cast<std::size_t>(config.batch_size);
      if (can_update && env_step % config.update_period == 0) {
        TrainMetricsRow row;
        for (int it = 0; it < config.gradient_iterations; ++it) {
          const std::vector<const Transition*> sampled =
              buffer.sample(batch_rng, static_cast<std::size_t>(config.batch_size));
          const double sigma = buffer.reward_sigma();

          std::vector<LossInput> batch;
          batch.reserve(sampled.size());
          for (const Transition* tr : sampled) {
            LossInput input;
            input.transition = tr;
            input.global_action =
                agents::decide(result.actor, arch, tr->s, graph, spec.norms, max_wait,
                               tr->observed_requests, agents::DecisionMode::kTrain,
                               batch_rng)
                    .action;
            if (!tr->done) {
              input.next_global_action =
                  agents::decide(result.actor, arch, tr->s_next, graph, spec.norms,
                                 max_wait, tr->observed_requests_next,
                                 agents::DecisionMode::kTrain, batch_rng)
                      .action;
            }
            batch.push_back(std::move(input));
          }

          LossResult c1 =
              critic_loss(batch, sigma, result.critic1, result.target1, result.target2,
                          result.actor, arch, graph, spec.norms, max_wait, config);
          LossResult c2 =
              critic_loss(batch, sigma, result.critic2, result.target1, result.target2,
                          result.actor, arch, graph, spec.norms, max_wait, config);
          LossResult a =
              actor_loss(batch, sigma, result.actor, result.critic1, result.critic2, arch,
                         graph, spec.norms, max_wait, config);
          if (!std::isfinite(c1.value) || !std::isfinite(c2.value) ||
              !std::isfinite(a.value)) {
            std::ostringstream diag;
            diag << "non-finite loss at env step " << env_step << ": critic1=" << c1.value
                 << " critic2=" << c2.value << " actor=" << a.value << " sigma=" << sigma
                 << " buffer=" << buffer.size();
            throw std::runtime_error(diag.str());
          }
          neural::clip_gradients(c1.grads, config.clip_ratio);
          neural::clip_gradients(c2.grads, config.clip_ratio);
          neural::clip_gradients(a.grads, config.clip_ratio);
          neural::adam_step(result.critic1, c1.grads, critic1_opt);
          neural::adam_step(result.critic2, c2.grads, critic2_opt);
          neural::adam_step(result.actor, a.grads, actor_opt);
          target_update(result.critic1, result.target1, config.target_smoothing);
          target_update(result.critic2, result.target2, config.target_smoothing);

          row.loss_critic1 = c1.value;
          row.loss_critic2 = c2.value;
          row.loss_actor = a.value;
        }
        row.env_step = env_step;
        row.buffer_size = buffer.size();
        row.wall_time_seconds = elapsed();
        result.metrics.push_back(row);
        if (on_metrics) on_metrics(result.metrics.back());
      }

      if (!spec.validation_streams.empty() && env_step % config.validation_period == 0) {
        TrainMetricsRow row;
        row.env_step = env_step;
        row.buffer_size = buffer.size();
        row.validation_mean_profit = run_validation(result.actor);
        row.wall_time_seconds = elapsed();
        result.metrics.push_back(row);
        if (on_metrics) on_metrics(result.metrics.back());
        if (row.validation_mean_profit > result.best_validation) {
          result.best_validation = row.validation_mean_profit;
          result.best_validation_step = env_step;
          result.best_actor = result.actor;
        }
      }
    }
  }

  if (result.best_validation_step < 0) {
    result.best_actor = result.actor;
  }
  return result;
}

}  // namespace amod::training
