#include "ifo/interact.hpp"

#include <algorithm>
#include <cmath>

namespace ifo {

SeqCursor make_cursor(EncoderBundle& bundle) {
  SeqCursor c;
  c.carry = bundle.f.initial_carry(1);
  return c;
}

SeqCursor advance_cursor(EncoderBundle& bundle, const SeqCursor& cursor,
                         const Frame& frame) {
  SeqCursor next;
  auto s = reshape(bundle.encode_frame(frame), {1, bundle.scale.state_dim()});
  auto [z, carry] = bundle.f.step(s, cursor.carry);
  next.carry = carry;
  next.z = z.data();
  next.steps = cursor.steps + 1;
  return next;
}

float learned_reward(const SeqCursor& agent, const SeqCursor& expert) {
  check_contract(agent.steps == expert.steps,
                 "learned_reward: cursors advanced to different steps");
  check_contract(agent.steps >= 1, "learned_reward: cursors not advanced");
  double d2 = 0.0;
  for (size_t i = 0; i < agent.z.size(); ++i) {
    const double d = static_cast<double>(agent.z[i]) - expert.z[i];
    d2 += d * d;
  }
  return -static_cast<float>(std::sqrt(d2));
}

RewardTracker::RewardTracker(EncoderBundle& bundle,
                             const Trajectory& expert_episode,
                             const Frame& agent_first_frame)
    : bundle_(bundle) {
  SeqCursor cur = make_cursor(bundle_);
  for (const auto& f : expert_episode.frames) {
    cur = advance_cursor(bundle_, cur, f);
    expert_z_.push_back(cur.z);
  }
  agent_ = advance_cursor(bundle_, make_cursor(bundle_), agent_first_frame);
}

float RewardTracker::on_agent_frame(const Frame& frame) {
  agent_ = advance_cursor(bundle_, agent_, frame);
  check_contract(agent_.steps <= static_cast<int>(expert_z_.size()),
                 "agent episode longer than expert reference");
  const auto& ez = expert_z_[static_cast<size_t>(agent_.steps - 1)];
  double d2 = 0.0;
  for (size_t i = 0; i < agent_.z.size(); ++i) {
    const double d = static_cast<double>(agent_.z[i]) - ez[i];
    d2 += d * d;
  }
  return -static_cast<float>(std::sqrt(d2));
}

namespace {

Tensor batch_frames(const std::vector<const Transition*>& batch, bool next,
                    int frame_size) {
  auto t = Tensor::zeros({static_cast<int>(batch.size()), 3, frame_size, frame_size});
  const size_t frame_elems = static_cast<size_t>(3) * frame_size * frame_size;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Frame& f = next ? batch[i]->o_next : batch[i]->o;
    check_dim(f.height == frame_size && f.width == frame_size,
              "replay frame size mismatch");
    for (size_t p = 0; p < frame_elems; ++p)
      t.data()[i * frame_elems + p] = static_cast<float>(f.rgb[p]) / 127.5f - 1.f;
  }
  return t;
}

void zero_all(AgentNets& nets) {
  for (auto& t : nets.critic_params()) t.zero_grad();
  for (auto& t : nets.policy_params()) t.zero_grad();
}

}  // namespace

UpdateStats actor_critic_update(AgentNets& nets,
                                const std::vector<const Transition*>& batch,
                                const RunConfig& cfg, Adam& critic_opt,
                                Adam& actor_opt) {
  UpdateStats stats;
  const int n = static_cast<int>(batch.size());
  auto o = batch_frames(batch, false, nets.frame_size);
  auto o2 = batch_frames(batch, true, nets.frame_size);
  auto actions = Tensor::zeros({n, 2});
  auto target = Tensor::zeros({n, 1});
  for (int i = 0; i < n; ++i) {
    actions.data()[2 * i] = batch[static_cast<size_t>(i)]->a[0];
    actions.data()[2 * i + 1] = batch[static_cast<size_t>(i)]->a[1];
  }

  {
    // Bootstrapped targets, no gradients.
    auto enc2 = nets.encode(o2);
    auto a2 = nets.policy(enc2);
    auto q2 = nets.target_critic(nets.target_encode(o2), a2);
    for (int i = 0; i < n; ++i)
      target.data()[static_cast<size_t>(i)] =
          batch[static_cast<size_t>(i)]->r +
          cfg.discount * q2.data()[static_cast<size_t>(i)];
  }

  {
    TapeScope scope;
    auto q = nets.critic(nets.encode(o), actions);
    auto diff = sub(q, target);
    auto loss = mean(mul(diff, diff));
    stats.critic_loss = loss.item();
    scope.backward(loss);
    critic_opt.step();
    zero_all(nets);
  }

  {
    // The actor sees a detached encoding: its gradient reaches the policy
    // head through the action input of the critic only.
    auto enc_leaf = nets.encode(o).clone_detached();
    TapeScope scope;
    auto act = nets.policy(enc_leaf);
    auto loss = neg(mean(nets.critic(enc_leaf, act)));
    stats.actor_q = -loss.item();
    scope.backward(loss);
    actor_opt.step();
    zero_all(nets);
  }

  nets.polyak_update(cfg.polyak);
  return stats;
}

namespace {

template <class PolicyFn>
double rollout_return(const PointEnv& env, uint64_t ep_seed, int steps,
                      PolicyFn&& policy) {
  EnvState s = env.reset(ep_seed);
  double ret = 0.0;
  for (int t = 0; t < steps; ++t) {
    auto [next, r] = env.step(s, policy(s));
    ret += r;
    s = next;
  }
  return ret;
}

struct Baselines {
  double expert = 0, random = 0;
};

Baselines measure_baselines(const PointEnv& env, int steps, int episodes,
                            uint64_t seed) {
  Baselines b;
  for (int i = 0; i < episodes; ++i) {
    const uint64_t ep_seed = Rng::derive(seed, 0x5eed0 + static_cast<uint64_t>(i)).next_u64();
    b.expert += rollout_return(env, ep_seed, steps, [&](const EnvState& s) {
      return env.expert_action(s);
    });
    Rng arng = Rng::derive(ep_seed, 0x7a4d);
    b.random += rollout_return(env, ep_seed, steps, [&](const EnvState&) {
      return Vec2{arng.uniformf(-1.f, 1.f), arng.uniformf(-1.f, 1.f)};
    });
  }
  b.expert /= episodes;
  b.random /= episodes;
  return b;
}

}  // namespace

EvalResult evaluate_agent(AgentNets& nets, EnvId env_id, int frame_size,
                          int episode_steps, int episodes, uint64_t seed) {
  check_value(episodes >= 1, "evaluation needs at least one episode");
  PointEnv env(env_id, frame_size);
  const Baselines base = measure_baselines(env, episode_steps, episodes, seed);
  check_contract(std::abs(base.expert - base.random) > 1e-9,
                 "degenerate task: expert and random returns coincide");

  std::vector<double> returns;
  for (int i = 0; i < episodes; ++i) {
    const uint64_t ep_seed = Rng::derive(seed, 0x5eed0 + static_cast<uint64_t>(i)).next_u64();
    returns.push_back(rollout_return(env, ep_seed, episode_steps,
                                     [&](const EnvState& s) {
                                       auto o = nets.frame_to_input(env.render(s));
                                       auto a = nets.policy(nets.encode(o));
                                       return Vec2{a.data()[0], a.data()[1]};
                                     }));
  }
  EvalResult res;
  for (double r : returns) res.mean_return += r;
  res.mean_return /= returns.size();
  double var = 0;
  for (double r : returns) var += (r - res.mean_return) * (r - res.mean_return);
  res.stddev_return = std::sqrt(var / returns.size());
  res.expert_return = base.expert;
  res.random_return = base.random;
  res.scaled_return =
      (res.mean_return - base.random) / (base.expert - base.random);
  return res;
}

EvalResult evaluate_reference(PolicyKind kind, EnvId env_id, int frame_size,
                              int episode_steps, int episodes, uint64_t seed) {
  check_value(episodes >= 1, "evaluation needs at least one episode");
  PointEnv env(env_id, frame_size);
  const Baselines base = measure_baselines(env, episode_steps, episodes, seed);
  check_contract(std::abs(base.expert - base.random) > 1e-9,
                 "degenerate task: expert and random returns coincide");
  std::vector<double> returns;
  for (int i = 0; i < episodes; ++i) {
    const uint64_t ep_seed = Rng::derive(seed, 0x5eed0 + static_cast<uint64_t>(i)).next_u64();
    if (kind == PolicyKind::kExpert) {
      returns.push_back(rollout_return(env, ep_seed, episode_steps,
                                       [&](const EnvState& s) {
                                         return env.expert_action(s);
                                       }));
    } else {
      Rng arng = Rng::derive(ep_seed, 0x7a4d);
      returns.push_back(rollout_return(env, ep_seed, episode_steps,
                                       [&](const EnvState&) {
                                         return Vec2{arng.uniformf(-1.f, 1.f),
                                                     arng.uniformf(-1.f, 1.f)};
                                       }));
    }
  }
  EvalResult res;
  for (double r : returns) res.mean_return += r;
  res.mean_return /= returns.size();
  double var = 0;
  for (double r : returns) var += (r - res.mean_return) * (r - res.mean_return);
  res.stddev_return = std::sqrt(var / returns.size());
  res.expert_return = base.expert;
  res.random_return = base.random;
  res.scaled_return =
      (res.mean_return - base.random) / (base.expert - base.random);
  return res;
}

InteractResult run_interactive(
    EncoderBundle& bundle, const TrajectoryDataset& expert_ds,
    const RunConfig& cfg,
    const std::function<void(const EpisodeRow&)>& on_episode) {
  check_contract(!expert_ds.trajectories.empty(), "expert dataset is empty");
  check_contract(expert_ds.frame_size == cfg.frame_size,
                 "expert dataset frame size mismatch");
  check_contract(expert_ds.episode_steps >= cfg.episode_steps,
                 "expert episodes shorter than configured episode length");
  cfg.validate();

  const EnvId env_id = env_id_from_string(cfg.env);
  PointEnv env(env_id, cfg.frame_size);

  InteractResult result{AgentNets::init(cfg.frame_size, Rng::derive(cfg.seed, 0x06e7).next_u64()),
                        {},
                        {}};
  AgentNets& nets = result.nets;
  if (cfg.n_pi == 0) {
    result.final_eval = evaluate_agent(nets, env_id, cfg.frame_size,
                                       cfg.episode_steps, cfg.eval_episodes,
                                       cfg.seed);
    return result;
  }

  Adam critic_opt(nets.critic_params(), cfg.rl_lr);
  Adam actor_opt(nets.policy_params(), cfg.rl_lr);
  Adam enc_opt(bundle.trainable_params(), cfg.lr);

  ReplayBuffer replay(static_cast<size_t>(cfg.replay_capacity));
  std::deque<Trajectory> agent_pool;  // bootstrapped negatives

  Rng rng_ref = Rng::derive(cfg.seed, 0x0e21);
  Rng rng_env = Rng::derive(cfg.seed, 0x0e22);
  Rng rng_noise = Rng::derive(cfg.seed, 0x0e23);
  Rng rng_replay = Rng::derive(cfg.seed, 0x0e24);
  Rng rng_enc = Rng::derive(cfg.seed, 0x0e25);

  const Baselines base =
      measure_baselines(env, cfg.episode_steps, cfg.eval_episodes, cfg.seed);
  check_contract(std::abs(base.expert - base.random) > 1e-9,
                 "degenerate task: expert and random returns coincide");

  const LossParams loss_params = cfg.loss_params();
  long long step = 0;
  long long last_marker = 0;

  while (step < cfg.n_pi) {
    const int ref_idx =
        rng_ref.randint(0, static_cast<int>(expert_ds.trajectories.size()) - 1);
    const Trajectory& ref = expert_ds.trajectories[static_cast<size_t>(ref_idx)];

    EnvState s = env.reset(rng_env.next_u64());
    Frame o = env.render(s);
    RewardTracker tracker(bundle, ref, o);

    Trajectory agent_traj;
    agent_traj.label = PolicyKind::kAgent;
    agent_traj.frames.push_back(o);

    EpisodeRow row;
    for (int t = 0; t < cfg.episode_steps; ++t) {
      Vec2 a;
      if (step < cfg.warmup_steps) {
        a = {rng_noise.uniformf(-1.f, 1.f), rng_noise.uniformf(-1.f, 1.f)};
      } else {
        auto at = nets.policy(nets.encode(nets.frame_to_input(o)));
        a = {at.data()[0], at.data()[1]};
        a[0] = std::clamp(a[0] + static_cast<float>(rng_noise.normal(0.0, cfg.exploration_noise)), -1.f, 1.f);
        a[1] = std::clamp(a[1] + static_cast<float>(rng_noise.normal(0.0, cfg.exploration_noise)), -1.f, 1.f);
      }
      auto [s2, r_true] = env.step(s, a);
      Frame o2 = env.render(s2);
      const float r = tracker.on_agent_frame(o2);

      replay.push(Transition{o, a, o2, r});
      row.learned_return += r;
      row.true_return += r_true;

      if (replay.size() >= static_cast<size_t>(cfg.rl_batch) &&
          step >= cfg.warmup_steps) {
        auto batch = replay.sample(cfg.rl_batch, rng_replay);
        actor_critic_update(nets, batch, cfg, critic_opt, actor_opt);
      }

      ++step;
      s = s2;
      o = o2;
      agent_traj.frames.push_back(o);
    }
    agent_traj.true_return = static_cast<float>(row.true_return);

    // Encoder update block at the episode boundary.
    const long long marker = step / cfg.n_update;
    if (marker > last_marker && step <= cfg.n_train) {
      agent_pool.push_back(agent_traj);
      while (agent_pool.size() > static_cast<size_t>(cfg.agent_buffer_capacity))
        agent_pool.pop_front();
      if (agent_pool.size() >= 2) {
        TrajectoryRefs e_batch, a_batch;
        for (int i = 0; i < cfg.interact_batch_pairs; ++i) {
          e_batch.push_back(&expert_ds.trajectories[static_cast<size_t>(rng_enc.randint(
              0, static_cast<int>(expert_ds.trajectories.size()) - 1))]);
          a_batch.push_back(&agent_pool[static_cast<size_t>(
              rng_enc.randint(0, static_cast<int>(agent_pool.size()) - 1))]);
        }
        alignment_step(bundle, e_batch, a_batch, loss_params, enc_opt, rng_enc,
                       &row.losses);
        row.encoder_updated = true;
      }
    }
    last_marker = marker;

    row.step = step;
    row.scaled_return =
        (row.true_return - base.random) / (base.expert - base.random);
    result.episodes.push_back(row);
    if (on_episode) on_episode(row);
  }

  result.final_eval = evaluate_agent(nets, env_id, cfg.frame_size,
                                     cfg.episode_steps, cfg.eval_episodes,
                                     cfg.seed);
  return result;
}

}  // namespace ifo
