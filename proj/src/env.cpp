#include "ifo/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ifo {
namespace {

constexpr float kAgentRadius = 0.07f;
constexpr float kObjectRadius = 0.07f;
constexpr float kGoalDrawRadius = 0.10f;
constexpr float kVelDecay = 0.8f;
constexpr float kActionGain = 0.1f;
constexpr float kExpertKp = 4.0f;
constexpr float kExpertKd = 2.0f;

constexpr uint8_t kBackground[3] = {38, 38, 46};
constexpr uint8_t kGoalColor[3] = {62, 205, 82};
constexpr uint8_t kAgentColor[3] = {232, 58, 48};
constexpr uint8_t kObjectColor[3] = {66, 108, 235};

float clampf(float v, float lo, float hi) { return std::min(std::max(v, lo), hi); }

float dist(const Vec2& a, const Vec2& b) {
  const float dx = a[0] - b[0], dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

Vec2 sample_point(Rng& rng, float margin) {
  return {rng.uniformf(margin, 1.f - margin), rng.uniformf(margin, 1.f - margin)};
}

void put_u32(std::ofstream& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}
void put_u64(std::ofstream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}
void put_f32(std::ofstream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}
uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw IoError("dataset truncated: " + path);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}
uint64_t get_u64(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw IoError("dataset truncated: " + path);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}
float get_f32(std::ifstream& in, const std::string& path) {
  const uint32_t bits = get_u32(in, path);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

EnvId env_id_from_string(const std::string& s) {
  if (s == "point_reach") return EnvId::kPointReach;
  if (s == "point_push") return EnvId::kPointPush;
  throw ValueError("unknown environment id: " + s);
}
std::string env_id_to_string(EnvId id) {
  return id == EnvId::kPointReach ? "point_reach" : "point_push";
}
std::string policy_kind_to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::kExpert: return "expert";
    case PolicyKind::kRandom: return "random";
    default: return "agent";
  }
}
PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "expert") return PolicyKind::kExpert;
  if (s == "random") return PolicyKind::kRandom;
  if (s == "agent") return PolicyKind::kAgent;
  throw ValueError("unknown policy kind: " + s);
}

PointEnv::PointEnv(EnvId id, int frame_size) : id_(id), frame_size_(frame_size) {
  check_value(frame_size >= 8, "frame size must be at least 8 pixels");
}

EnvState PointEnv::reset(uint64_t seed) const {
  Rng rng = Rng::derive(seed, 0x9a7e);
  EnvState s;
  // Rejection sampling keeps start and goal separated so episodes always
  // begin unsolved.
  for (;;) {
    s.position = sample_point(rng, 0.1f);
    s.goal = sample_point(rng, 0.1f);
    if (dist(s.position, s.goal) >= kMinSeparation) break;
  }
  if (id_ == EnvId::kPointPush) {
    for (;;) {
      s.object = sample_point(rng, 0.18f);
      if (dist(s.object, s.goal) >= 0.25f && dist(s.object, s.position) >= 0.18f)
        break;
    }
  }
  s.velocity = {0.f, 0.f};
  s.step_index = 0;
  return s;
}

std::pair<EnvState, float> PointEnv::step(const EnvState& state, Vec2 action,
                                          bool* clamped) const {
  bool was_clamped = false;
  for (float& a : action) {
    if (a < -1.f || a > 1.f) was_clamped = true;
    a = clampf(a, -1.f, 1.f);
  }
  if (clamped) *clamped = was_clamped;

  EnvState next = state;
  for (int i = 0; i < 2; ++i) {
    next.velocity[i] = kVelDecay * state.velocity[i] + kActionGain * action[i];
    next.position[i] = clampf(state.position[i] + next.velocity[i], 0.f, 1.f);
  }
  if (id_ == EnvId::kPointPush) {
    const float contact = kAgentRadius + kObjectRadius;
    const float d = dist(next.position, next.object);
    if (d < contact) {
      Vec2 dir{1.f, 0.f};
      if (d > 1e-6f)
        dir = {(next.object[0] - next.position[0]) / d,
               (next.object[1] - next.position[1]) / d};
      const float push = contact - d;
      next.object[0] = clampf(next.object[0] + dir[0] * push, 0.f, 1.f);
      next.object[1] = clampf(next.object[1] + dir[1] * push, 0.f, 1.f);
    }
  }
  next.step_index = state.step_index + 1;

  const Vec2& tracked = id_ == EnvId::kPointPush ? next.object : next.position;
  const float reward = dist(tracked, next.goal) < kGoalRadius ? 1.f : 0.f;
  return {next, reward};
}

Frame PointEnv::render(const EnvState& state) const {
  Frame frame(frame_size_, frame_size_);
  const size_t plane = static_cast<size_t>(frame_size_) * frame_size_;
  for (int c = 0; c < 3; ++c)
    std::fill(frame.rgb.begin() + c * plane, frame.rgb.begin() + (c + 1) * plane,
              kBackground[c]);

  auto draw_disc = [&](const Vec2& center, float radius, const uint8_t color[3]) {
    const float r2 = radius * radius;
    for (int y = 0; y < frame_size_; ++y) {
      const float py = (y + 0.5f) / frame_size_;
      const float dy = py - center[1];
      for (int x = 0; x < frame_size_; ++x) {
        const float px = (x + 0.5f) / frame_size_;
        const float dx = px - center[0];
        if (dx * dx + dy * dy <= r2) {
          const size_t p = static_cast<size_t>(y) * frame_size_ + x;
          frame.rgb[p] = color[0];
          frame.rgb[plane + p] = color[1];
          frame.rgb[2 * plane + p] = color[2];
        }
      }
    }
  };

  draw_disc(state.goal, kGoalDrawRadius, kGoalColor);
  if (id_ == EnvId::kPointPush) draw_disc(state.object, kObjectRadius, kObjectColor);
  draw_disc(state.position, kAgentRadius, kAgentColor);
  return frame;
}

Vec2 PointEnv::expert_action(const EnvState& state) const {
  Vec2 target = state.goal;
  if (id_ == EnvId::kPointPush) {
    const float d_goal = dist(state.object, state.goal);
    if (d_goal < kGoalRadius * 0.8f) {
      // Object delivered; brake in place.
      return {clampf(-kExpertKd * state.velocity[0], -1.f, 1.f),
              clampf(-kExpertKd * state.velocity[1], -1.f, 1.f)};
    }
    Vec2 dir{(state.goal[0] - state.object[0]) / d_goal,
             (state.goal[1] - state.object[1]) / d_goal};
    const Vec2 behind{state.object[0] - dir[0] * 0.12f,
                      state.object[1] - dir[1] * 0.12f};
    const float d_obj = dist(state.position, state.object);
    Vec2 to_obj{0.f, 0.f};
    if (d_obj > 1e-6f)
      to_obj = {(state.object[0] - state.position[0]) / d_obj,
                (state.object[1] - state.position[1]) / d_obj};
    const float aligned = to_obj[0] * dir[0] + to_obj[1] * dir[1];
    // Push through the object when lined up behind it, otherwise get behind.
    if (aligned > 0.8f && d_obj < 0.3f)
      target = {state.object[0] + dir[0] * 0.05f, state.object[1] + dir[1] * 0.05f};
    else
      target = behind;
  }
  return {clampf(kExpertKp * (target[0] - state.position[0]) -
                     kExpertKd * state.velocity[0],
                 -1.f, 1.f),
          clampf(kExpertKp * (target[1] - state.position[1]) -
                     kExpertKd * state.velocity[1],
                 -1.f, 1.f)};
}

TrajectoryDataset generate_dataset(EnvId env_id, PolicyKind policy, int count,
                                   int steps, int frame_size, uint64_t seed) {
  check_value(count >= 1, "dataset count must be >= 1");
  check_value(steps >= 2, "dataset episode length must be >= 2");
  check_value(policy != PolicyKind::kAgent,
              "generate_dataset supports expert and random policies");
  PointEnv env(env_id, frame_size);
  TrajectoryDataset ds;
  ds.env_id = env_id;
  ds.episode_steps = steps;
  ds.frame_size = frame_size;
  ds.seed = seed;
  ds.policy = policy;
  ds.trajectories.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const uint64_t ep_seed = Rng::derive(seed, static_cast<uint64_t>(i)).next_u64();
    if (policy == PolicyKind::kExpert) {
      ds.trajectories.push_back(rollout_episode(
          env, ep_seed, steps, [&](const EnvState& s) { return env.expert_action(s); },
          PolicyKind::kExpert));
    } else {
      Rng arng = Rng::derive(ep_seed, 0xac7);
      ds.trajectories.push_back(rollout_episode(
          env, ep_seed, steps,
          [&](const EnvState&) {
            return Vec2{arng.uniformf(-1.f, 1.f), arng.uniformf(-1.f, 1.f)};
          },
          PolicyKind::kRandom));
    }
  }
  return ds;
}

void save_dataset(const TrajectoryDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open dataset for writing: " + path);
  const bool has_actions =
      !ds.trajectories.empty() && ds.trajectories.front().actions.has_value();
  out.write("IFDS", 4);
  put_u32(out, 1);
  put_u32(out, static_cast<uint32_t>(ds.env_id));
  put_u32(out, static_cast<uint32_t>(ds.trajectories.size()));
  put_u32(out, static_cast<uint32_t>(ds.episode_steps));
  put_u32(out, static_cast<uint32_t>(ds.frame_size));
  put_u32(out, static_cast<uint32_t>(ds.frame_size));
  put_u64(out, ds.seed);
  put_u32(out, static_cast<uint32_t>(ds.policy));
  put_u32(out, has_actions ? 1u : 0u);
  put_u32(out, 2u);  // action dimension

  for (const auto& traj : ds.trajectories) {
    check_contract(static_cast<int>(traj.frames.size()) == ds.episode_steps + 1,
                   "trajectory frame count mismatch on save");
    for (const auto& f : traj.frames)
      out.write(reinterpret_cast<const char*>(f.rgb.data()),
                static_cast<std::streamsize>(f.rgb.size()));
  }
  if (has_actions) {
    for (const auto& traj : ds.trajectories) {
      check_contract(traj.actions && static_cast<int>(traj.actions->size()) ==
                                         ds.episode_steps,
                     "trajectory action count mismatch on save");
      for (const auto& a : *traj.actions) {
        put_f32(out, a[0]);
        put_f32(out, a[1]);
      }
    }
  }
  for (const auto& traj : ds.trajectories) put_f32(out, traj.true_return);
  if (!out) throw IoError("write failed for dataset: " + path);
}

TrajectoryDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "IFDS", 4) != 0)
    throw IoError("bad dataset magic: " + path);
  const uint32_t version = get_u32(in, path);
  if (version != 1)
    throw IoError("unsupported dataset version in " + path + ": " +
                  std::to_string(version));
  TrajectoryDataset ds;
  ds.env_id = static_cast<EnvId>(get_u32(in, path));
  const uint32_t count = get_u32(in, path);
  ds.episode_steps = static_cast<int>(get_u32(in, path));
  const uint32_t h = get_u32(in, path);
  const uint32_t w = get_u32(in, path);
  if (h != w) throw IoError("dataset frames must be square: " + path);
  ds.frame_size = static_cast<int>(h);
  ds.seed = get_u64(in, path);
  ds.policy = static_cast<PolicyKind>(get_u32(in, path));
  const bool has_actions = get_u32(in, path) != 0;
  const uint32_t action_dim = get_u32(in, path);
  if (has_actions && action_dim != 2)
    throw IoError("unsupported action dimension in " + path);

  ds.trajectories.resize(count);
  const size_t frame_bytes = static_cast<size_t>(3) * h * w;
  for (auto& traj : ds.trajectories) {
    traj.label = ds.policy;
    traj.frames.resize(static_cast<size_t>(ds.episode_steps) + 1);
    for (auto& f : traj.frames) {
      f = Frame(static_cast<int>(h), static_cast<int>(w));
      if (!in.read(reinterpret_cast<char*>(f.rgb.data()),
                   static_cast<std::streamsize>(frame_bytes)))
        throw IoError("dataset truncated reading frames: " + path);
    }
  }
  if (has_actions) {
    for (auto& traj : ds.trajectories) {
      traj.actions.emplace(static_cast<size_t>(ds.episode_steps));
      for (auto& a : *traj.actions) {
        a[0] = get_f32(in, path);
        a[1] = get_f32(in, path);
      }
    }
  }
  for (auto& traj : ds.trajectories) traj.true_return = get_f32(in, path);
  return ds;
}

}  // namespace ifo
