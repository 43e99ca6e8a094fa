#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "core/agents.hpp"
#include "core/demand.hpp"
#include "core/nn.hpp"
#include "core/world.hpp"

namespace amod::training {

using agents::ArchitectureConfig;
using agents::NormalizationConstants;
using neural::Mat;
using neural::ParameterSet;

// One replay record. s_next keeps the true next vehicle block but carries s's
// request block, so both states always expose the same R x K agent grid.
struct Transition {
  world::SystemState s;
  world::ActionVector action;  // post-matching global action on s
  Mat rewards;                 // R x K per-agent rewards
  world::SystemState s_next;   // request block replaced by s's
  bool done = false;
  int observed_requests = 0;       // cumulative demand at s
  int observed_requests_next = 0;  // cumulative demand at s_next
};

// FIFO ring buffer with running reward moments for normalization. The
// normalization statistic is the population standard deviation over every
// stored per-agent reward, zeros included.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void store(Transition transition);
  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }

  // Population sigma of all stored rewards; degenerate buffers yield 1 so
  // normalization is a no-op.
  double reward_sigma() const;

  // Uniform with replacement. Errors on an underfull buffer.
  std::vector<const Transition*> sample(Rng& rng, std::size_t batch) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> storage_;
  double reward_sum_ = 0.0;
  double reward_sumsq_ = 0.0;
  long reward_count_ = 0;
};

struct SACConfig {
  double alpha = 0.7;           // entropy coefficient, fixed per instance
  double gamma = 0.9;
  double target_smoothing = 5e-3;
  int batch_size = 128;
  long total_steps = 200000;
  long warmup_steps = 20000;
  int update_period = 20;
  int gradient_iterations = 1;  // gradient steps per update event
  long validation_period = 2880;
  std::size_t buffer_capacity = 100000;
  double learning_rate = 3e-4;
  double l2_coefficient = 1e-4;
  double clip_ratio = 10.0;
  double huber_delta = 10.0;
};

// Batch element with the global actions recomputed under the current policy;
// the losses treat them as fixed inputs, which keeps both losses
// deterministic functions of the parameters.
struct LossInput {
  const Transition* transition = nullptr;
  world::ActionVector global_action;       // on s
  world::ActionVector next_global_action;  // on s_next
};

struct LossResult {
  double value = 0.0;
  neural::Gradients grads;
};

// J_pi: mean over transitions of sum_i pi^T (alpha log pi - min_j Q_j), with
// the critics evaluated as constants so gradients flow only through pi. The
// L2 penalty on the actor weights is added in.
LossResult actor_loss(std::span<const LossInput> batch, double sigma,
                      const ParameterSet& actor, const ParameterSet& critic1,
                      const ParameterSet& critic2, const ArchitectureConfig& arch,
                      const world::ZoneGraph& graph, const NormalizationConstants& norms,
                      int max_wait, const SACConfig& config);

// J_Q for one critic: Huber(delta) over per-agent TD errors against
// y = r/sigma + gamma * pi'^T (min_j Qbar_j - alpha log pi'), bootstrap
// dropped on terminal transitions; y carries no gradient. L2 added in.
LossResult critic_loss(std::span<const LossInput> batch, double sigma,
                       const ParameterSet& critic, const ParameterSet& target1,
                       const ParameterSet& target2, const ParameterSet& actor,
                       const ArchitectureConfig& arch, const world::ZoneGraph& graph,
                       const NormalizationConstants& norms, int max_wait,
                       const SACConfig& config);

// Polyak averaging: target <- (1 - rho) * target + rho * primary.
void target_update(const ParameterSet& primary, ParameterSet& target, double rho);

// A policy maps (pre-decision state, cumulative observed requests, rng) to an
// action; greedy/MPC/RL all fit this shape for shared evaluation.
using PolicyFn = std::function<world::ActionVector(const world::SystemState&, int, Rng&)>;

struct EpisodeStats {
  double profit = 0.0;  // step profits plus run-out
  int total_requests = 0;
  int accepted_requests = 0;
};

// Runs one full episode on a request stream: initial uniform fleet placement
// from placement_rng, T policy steps, then the run-out closure.
EpisodeStats run_episode(const PolicyFn& policy, const demand::RequestStream& stream,
                         const world::ZoneGraph& graph, const world::PricingModel& prices,
                         const world::EpisodeConfig& episode, Rng& placement_rng,
                         Rng& policy_rng);

// Everything the trainer needs about the experiment world.
struct EnvironmentSpec {
  const world::ZoneGraph* graph = nullptr;
  world::PricingModel prices;
  world::EpisodeConfig episode;
  NormalizationConstants norms;
  std::vector<demand::RequestStream> train_streams;
  std::vector<demand::RequestStream> validation_streams;
};

struct TrainMetricsRow {
  long env_step = 0;
  double loss_actor = 0.0;
  double loss_critic1 = 0.0;
  double loss_critic2 = 0.0;
  std::size_t buffer_size = 0;
  double validation_mean_profit = std::numeric_limits<double>::quiet_NaN();
  double wall_time_seconds = 0.0;
};

struct TrainResult {
  ParameterSet actor;
  ParameterSet critic1, critic2;
  ParameterSet target1, target2;
  ParameterSet best_actor;  // checkpoint with the best validation mean profit
  double best_validation = -std::numeric_limits<double>::infinity();
  long best_validation_step = -1;
  std::vector<TrainMetricsRow> metrics;
};

// Full SAC training run for one seed: warmup with a uniform random policy,
// then sampled decisions, replay updates every update_period steps (critics,
// actor, targets), and periodic validation with argmax decisions. Throws on a
// non-finite loss with a diagnostic message.
TrainResult train(const EnvironmentSpec& spec, const ArchitectureConfig& arch,
                  const SACConfig& config, std::uint64_t seed,
                  const std::function<void(const TrainMetricsRow&)>& on_metrics = {});

struct EvalResult {
  std::vector<EpisodeStats> per_episode;
  double mean_profit = 0.0;
  double served_share = 0.0;  // accepted / total over all episodes
};

EvalResult evaluate_policy(const PolicyFn& policy,
                           std::span<const demand::RequestStream> streams,
                           const world::ZoneGraph& graph, const world::PricingModel& prices,
                           const world::EpisodeConfig& episode, std::uint64_t seed);

// Wraps an actor checkpoint as a policy (test mode = argmax post-processing).
PolicyFn make_rl_policy(const ParameterSet& actor, const ArchitectureConfig& arch,
                        const world::ZoneGraph& graph, const NormalizationConstants& norms,
                        int max_wait, agents::DecisionMode mode);

// Uniform accept/reject policy used during warmup, kept public for baselines
// in tests.
world::ActionVector random_policy_action(const world::SystemState& state,
                                         const world::ZoneGraph& graph, int max_wait,
                                         Rng& rng);

}  // namespace amod::training
