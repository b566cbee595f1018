#ifndef IFO_INTERACT_HPP_
#define IFO_INTERACT_HPP_

#include <deque>
#include <functional>
#include <vector>

#include "ifo/align.hpp"
#include "ifo/config.hpp"
#include "ifo/env.hpp"
#include "ifo/nets.hpp"

namespace ifo {

// Replay record; r is the learned reward (never positive).
struct Transition {
  Frame o;
  Vec2 a;
  Frame o_next;
  float r = 0.f;
};

// Bounded FIFO store with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {}

  void push(Transition t) {
    if (buf_.size() == capacity_) buf_.pop_front();
    buf_.push_back(std::move(t));
  }
  size_t size() const { return buf_.size(); }
  size_t capacity() const { return capacity_; }
  std::vector<const Transition*> sample(int batch, Rng& rng) const {
    check_contract(static_cast<size_t>(batch) <= buf_.size(),
                   "replay sample larger than buffer");
    std::vector<const Transition*> out;
    out.reserve(static_cast<size_t>(batch));
    for (int i = 0; i < batch; ++i)
      out.push_back(&buf_[static_cast<size_t>(
          rng.randint(0, static_cast<int>(buf_.size()) - 1))]);
    return out;
  }
  const Transition& at(size_t i) const { return buf_[i]; }

 private:
  size_t capacity_;
  std::deque<Transition> buf_;
};

// Incremental sequence-encoding cursor over a growing frame prefix.
struct SeqCursor {
  SeqEncoderT<float>::Carry carry;
  std::vector<float> z;
  int steps = 0;  // frames consumed
};

SeqCursor make_cursor(EncoderBundle& bundle);
// Extends the prefix by one frame (eval mode, no gradients).
SeqCursor advance_cursor(EncoderBundle& bundle, const SeqCursor& cursor,
                         const Frame& frame);
// r = -||z_agent - z_expert||; both cursors must have consumed the same
// number of frames.
float learned_reward(const SeqCursor& agent, const SeqCursor& expert);

// Precomputes the expert episode's cursor states so per-step rewards only
// advance the agent side.
class RewardTracker {
 public:
  RewardTracker(EncoderBundle& bundle, const Trajectory& expert_episode,
                const Frame& agent_first_frame);
  // Rewards r_1..r_T for agent frames o_1..o_T.
  float on_agent_frame(const Frame& frame);
  int steps() const { return agent_.steps; }

 private:
  EncoderBundle& bundle_;
  std::vector<std::vector<float>> expert_z_;  // z after frames 0..t
  SeqCursor agent_;
};

struct EpisodeRow {
  long long step = 0;
  double learned_return = 0, true_return = 0, scaled_return = 0;
  bool encoder_updated = false;
  LossReport losses;
};

struct EvalResult {
  double mean_return = 0, stddev_return = 0;
  double scaled_return = 0;
  double expert_return = 0, random_return = 0;
};

struct InteractResult {
  AgentNets nets;
  std::vector<EpisodeRow> episodes;
  EvalResult final_eval;
};

struct UpdateStats {
  float critic_loss = 0.f;
  float actor_q = 0.f;  // mean Q(o, pi(o)) before the actor step
};

// One deterministic actor-critic update: the critic regresses
// r + gamma * Q_target(o', pi(o')), the actor ascends Q(o, pi(o)) through
// the action input only, and targets are polyak-blended.
UpdateStats actor_critic_update(AgentNets& nets,
                                const std::vector<const Transition*>& batch,
                                const RunConfig& cfg, Adam& critic_opt,
                                Adam& actor_opt);

// Noise-free policy evaluation. Expert and random baselines are measured
// over the same episode seeds; scaled = (R - R_rand) / (R_exp - R_rand).
EvalResult evaluate_agent(AgentNets& nets, EnvId env_id, int frame_size,
                          int episode_steps, int episodes, uint64_t seed);
// Baseline-only variant used by the eval command.
EvalResult evaluate_reference(PolicyKind kind, EnvId env_id, int frame_size,
                              int episode_steps, int episodes, uint64_t seed);

// Full interactive phase per the two-phase training scheme: per episode a
// reference expert episode is sampled, the agent collects transitions
// rewarded by trajectory distance, actor-critic updates run every step,
// and at episode boundaries that cross a multiple of n_update (while
// step <= n_train) the episode is added to the bootstrapped negative set
// and the encoders take one update on expert vs agent batches. After
// n_train the bundle is frozen.
InteractResult run_interactive(
    EncoderBundle& bundle, const TrajectoryDataset& expert_ds,
    const RunConfig& cfg,
    const std::function<void(const EpisodeRow&)>& on_episode = nullptr);

}  // namespace ifo

#endif  // IFO_INTERACT_HPP_
