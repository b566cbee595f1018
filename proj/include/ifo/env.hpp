#ifndef IFO_ENV_HPP_
#define IFO_ENV_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ifo/rng.hpp"
#include "ifo/vision.hpp"

namespace ifo {

using Vec2 = std::array<float, 2>;

enum class EnvId : uint32_t { kPointReach = 0, kPointPush = 1 };
enum class PolicyKind : uint32_t { kExpert = 0, kRandom = 1, kAgent = 2 };

EnvId env_id_from_string(const std::string& s);
std::string env_id_to_string(EnvId id);
std::string policy_kind_to_string(PolicyKind p);
PolicyKind policy_kind_from_string(const std::string& s);

struct EnvState {
  Vec2 position{0.f, 0.f};
  Vec2 velocity{0.f, 0.f};
  Vec2 goal{0.f, 0.f};
  Vec2 object{0.f, 0.f};  // PointPush only
  int step_index = 0;
};

// Two procedurally rendered planar control tasks on the unit square:
// PointReach (drive the agent disc into the goal disc) and PointPush
// (push a free disc into the goal disc). Dynamics are a damped velocity
// recursion; rendering is flat-shaded discs without anti-aliasing.
class PointEnv {
 public:
  PointEnv(EnvId id, int frame_size);

  EnvState reset(uint64_t seed) const;
  // Action components outside [-1,1] are clamped; the clamp is reported
  // through the optional flag for diagnostics.
  std::pair<EnvState, float> step(const EnvState& state, Vec2 action,
                                  bool* clamped = nullptr) const;
  Frame render(const EnvState& state) const;
  Vec2 expert_action(const EnvState& state) const;

  EnvId id() const { return id_; }
  int frame_size() const { return frame_size_; }

  static constexpr float kGoalRadius = 0.05f;   // task success radius
  static constexpr float kMinSeparation = 0.3f;

 private:
  EnvId id_;
  int frame_size_;
};

// One rendered episode. Frames has length T+1; actions, when present, has
// length T. true_return is the hidden task reward total, evaluation only.
struct Trajectory {
  std::vector<Frame> frames;
  std::optional<std::vector<Vec2>> actions;
  float true_return = 0.f;
  PolicyKind label = PolicyKind::kRandom;
};

struct TrajectoryDataset {
  EnvId env_id = EnvId::kPointReach;
  int episode_steps = 0;  // T; frames per trajectory is T+1
  int frame_size = 0;
  uint64_t seed = 0;
  PolicyKind policy = PolicyKind::kRandom;
  std::vector<Trajectory> trajectories;

  size_t size() const { return trajectories.size(); }
};

// Rolls one episode with the given policy callable (state -> action).
template <class PolicyFn>
Trajectory rollout_episode(const PointEnv& env, uint64_t episode_seed, int steps,
                           PolicyFn&& policy, PolicyKind label,
                           bool keep_actions = true) {
  Trajectory traj;
  traj.label = label;
  EnvState s = env.reset(episode_seed);
  traj.frames.push_back(env.render(s));
  if (keep_actions) traj.actions.emplace();
  float ret = 0.f;
  for (int t = 0; t < steps; ++t) {
    const Vec2 a = policy(s);
    auto [next, reward] = env.step(s, a);
    ret += reward;
    if (keep_actions) traj.actions->push_back(a);
    traj.frames.push_back(env.render(next));
    s = next;
  }
  traj.true_return = ret;
  return traj;
}

// Generates and persists the seeded dataset; see docs/formats.md for the
// exact byte layout.
TrajectoryDataset generate_dataset(EnvId env_id, PolicyKind policy, int count,
                                   int steps, int frame_size, uint64_t seed);
void save_dataset(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

}  // namespace ifo

#endif  // IFO_ENV_HPP_
