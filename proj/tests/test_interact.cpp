#include <cmath>

#include "doctest.h"
#include "ifo/interact.hpp"

using namespace ifo;

namespace {

RunConfig tiny_config() {
  RunConfig cfg = RunConfig::desk();
  cfg.n_trajectories = 6;
  cfg.episode_steps = 8;
  cfg.batch_pairs = 2;
  cfg.interact_batch_pairs = 2;
  cfg.seq_negatives = 2;
  cfg.n_pretrain = 2;
  cfg.n_pi = 120;
  cfg.n_train = 80;
  cfg.n_update = 16;
  cfg.warmup_steps = 24;
  cfg.rl_batch = 16;
  cfg.replay_capacity = 512;
  cfg.eval_episodes = 4;
  cfg.eval_interval = 1000;
  cfg.seed = 9;
  return cfg;
}

TrajectoryDataset tiny_expert(const RunConfig& cfg) {
  return generate_dataset(EnvId::kPointReach, PolicyKind::kExpert,
                          cfg.n_trajectories, cfg.episode_steps, cfg.frame_size,
                          cfg.seed);
}

std::vector<float> nets_params(AgentNets& n) {
  std::vector<float> out;
  for (auto& t : n.critic_params()) out.insert(out.end(), t.data().begin(), t.data().end());
  for (auto& t : n.policy_params()) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

std::vector<float> bundle_params(EncoderBundle& b) {
  std::vector<float> out;
  for (auto& t : b.trainable_params())
    out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

}  // namespace

TEST_CASE("replay buffer is a bounded fifo with contract-checked sampling") {
  ReplayBuffer buf(3);
  Rng rng(1);
  CHECK_THROWS_AS(buf.sample(1, rng), ContractError);
  for (int i = 0; i < 5; ++i) {
    Transition t;
    t.r = -static_cast<float>(i);
    buf.push(t);
    CHECK(buf.size() <= 3);
  }
  // Oldest transitions were evicted first.
  CHECK(buf.at(0).r == -2.f);
  CHECK(buf.at(2).r == -4.f);
  auto batch = buf.sample(2, rng);
  CHECK(batch.size() == 2);
}

TEST_CASE("learned reward contract") {
  auto bundle = EncoderBundle::init(NetScale::desk(), 2);
  PointEnv env(EnvId::kPointReach, 32);
  auto s = env.reset(3);
  Frame f0 = env.render(s);
  auto [s1, r1] = env.step(s, {0.5f, -0.2f});
  Frame f1 = env.render(s1);

  SUBCASE("identical prefixes have zero distance") {
    auto a = advance_cursor(bundle, make_cursor(bundle), f0);
    auto b = advance_cursor(bundle, make_cursor(bundle), f0);
    CHECK(learned_reward(a, b) == 0.f);
    a = advance_cursor(bundle, a, f1);
    b = advance_cursor(bundle, b, f1);
    CHECK(learned_reward(a, b) == 0.f);
  }
  SUBCASE("rewards are never positive") {
    auto a = advance_cursor(bundle, make_cursor(bundle), f0);
    auto b = advance_cursor(bundle, make_cursor(bundle), f1);
    CHECK(learned_reward(a, b) <= 0.f);
  }
  SUBCASE("desynchronized cursors are rejected") {
    auto a = advance_cursor(bundle, make_cursor(bundle), f0);
    auto b = advance_cursor(bundle, advance_cursor(bundle, make_cursor(bundle), f0), f1);
    CHECK_THROWS_AS(learned_reward(a, b), ContractError);
  }
  SUBCASE("incremental reward matches full-prefix recomputation") {
    // Roll two different short trajectories.
    std::vector<Frame> agent_frames{f0}, expert_frames{f0};
    EnvState sa = s, se = s;
    Rng rng(7);
    for (int t = 0; t < 5; ++t) {
      auto [na, ra] = env.step(sa, {rng.uniformf(-1.f, 1.f), rng.uniformf(-1.f, 1.f)});
      auto [ne, re] = env.step(se, env.expert_action(se));
      agent_frames.push_back(env.render(na));
      expert_frames.push_back(env.render(ne));
      sa = na;
      se = ne;
    }
    auto ca = make_cursor(bundle);
    auto ce = make_cursor(bundle);
    for (size_t t = 0; t < agent_frames.size(); ++t) {
      ca = advance_cursor(bundle, ca, agent_frames[t]);
      ce = advance_cursor(bundle, ce, expert_frames[t]);
      const float r_inc = learned_reward(ca, ce);

      // Full-prefix recomputation through encode_sequence.
      auto encode_prefix = [&](const std::vector<Frame>& frames, size_t count) {
        std::vector<LabViews> views;
        for (size_t i = 0; i < count; ++i) views.push_back(rgb_to_lab(frames[i]));
        std::vector<const LabViews*> ptrs;
        for (auto& v : views) ptrs.push_back(&v);
        auto [l, ab] = lab_batch_tensors<float>(ptrs);
        auto states = bundle.encode_views(l, ab, false);
        auto [z, carry] = bundle.encode_sequence(states);
        return z.data();
      };
      auto za = encode_prefix(agent_frames, t + 1);
      auto ze = encode_prefix(expert_frames, t + 1);
      double d2 = 0;
      for (size_t j = 0; j < za.size(); ++j)
        d2 += (static_cast<double>(za[j]) - ze[j]) * (za[j] - ze[j]);
      CHECK(std::abs(r_inc + std::sqrt(d2)) < 1e-5);
    }
  }
}

TEST_CASE("reward tracker mirrors cursor arithmetic") {
  auto bundle = EncoderBundle::init(NetScale::desk(), 4);
  PointEnv env(EnvId::kPointReach, 32);
  auto ds = generate_dataset(EnvId::kPointReach, PolicyKind::kExpert, 1, 6, 32, 11);
  const auto& ref = ds.trajectories[0];

  auto s = env.reset(13);
  Frame o0 = env.render(s);
  RewardTracker tracker(bundle, ref, o0);

  auto agent_cursor = advance_cursor(bundle, make_cursor(bundle), o0);
  auto expert_cursor = make_cursor(bundle);
  expert_cursor = advance_cursor(bundle, expert_cursor, ref.frames[0]);

  auto [s1, r] = env.step(s, {0.3f, 0.3f});
  Frame o1 = env.render(s1);
  const float tracked = tracker.on_agent_frame(o1);
  agent_cursor = advance_cursor(bundle, agent_cursor, o1);
  expert_cursor = advance_cursor(bundle, expert_cursor, ref.frames[1]);
  CHECK(tracked == doctest::Approx(learned_reward(agent_cursor, expert_cursor))
                       .epsilon(1e-6));
}

TEST_CASE("actor-critic update math") {
  auto cfg = tiny_config();
  AgentNets nets = AgentNets::init(32, 21);
  Rng rng(5);
  PointEnv env(EnvId::kPointReach, 32);

  std::vector<Transition> storage;
  for (int i = 0; i < 8; ++i) {
    auto s = env.reset(static_cast<uint64_t>(100 + i));
    Transition t;
    t.o = env.render(s);
    t.a = {rng.uniformf(-1.f, 1.f), rng.uniformf(-1.f, 1.f)};
    auto [s2, r_true] = env.step(s, t.a);
    t.o_next = env.render(s2);
    t.r = -rng.uniformf(0.f, 2.f);
    storage.push_back(t);
  }
  std::vector<const Transition*> batch;
  for (const auto& t : storage) batch.push_back(&t);

  SUBCASE("vanishing learning rates leave all parameters unchanged") {
    RunConfig frozen = cfg;
    frozen.rl_lr = 1e-30f;
    Adam copt(nets.critic_params(), frozen.rl_lr);
    Adam aopt(nets.policy_params(), frozen.rl_lr);
    auto before = nets_params(nets);
    auto o = Tensor::zeros({1, 3, 32, 32});
    auto tq_before = nets.target_critic(nets.target_encode(o), Tensor::zeros({1, 2}));
    actor_critic_update(nets, batch, frozen, copt, aopt);
    auto after = nets_params(nets);
    float max_delta = 0.f;
    for (size_t i = 0; i < before.size(); ++i)
      max_delta = std::max(max_delta, std::abs(after[i] - before[i]));
    CHECK(max_delta <= 1e-20f);
    // Targets started equal to online and online did not move.
    auto tq_after = nets.target_critic(nets.target_encode(o), Tensor::zeros({1, 2}));
    CHECK(std::abs(tq_before.item() - tq_after.item()) <= 1e-12f);
  }

  SUBCASE("with zero discount the critic loss is the mse to stored rewards") {
    RunConfig gamma0 = cfg;
    gamma0.discount = 0.f;
    Adam copt(nets.critic_params(), gamma0.rl_lr);
    Adam aopt(nets.policy_params(), gamma0.rl_lr);

    // Expected loss computed externally before the update.
    auto frames = Tensor::zeros({8, 3, 32, 32});
    for (int i = 0; i < 8; ++i)
      for (size_t p = 0; p < storage[static_cast<size_t>(i)].o.rgb.size(); ++p)
        frames.data()[static_cast<size_t>(i) * 3 * 32 * 32 + p] =
            storage[static_cast<size_t>(i)].o.rgb[p] / 127.5f - 1.f;
    auto actions = Tensor::zeros({8, 2});
    for (int i = 0; i < 8; ++i) {
      actions.data()[2 * static_cast<size_t>(i)] = storage[static_cast<size_t>(i)].a[0];
      actions.data()[2 * static_cast<size_t>(i) + 1] = storage[static_cast<size_t>(i)].a[1];
    }
    auto q = nets.critic(nets.encode(frames), actions);
    double want = 0;
    for (int i = 0; i < 8; ++i) {
      const double d = q.data()[static_cast<size_t>(i)] - storage[static_cast<size_t>(i)].r;
      want += d * d;
    }
    want /= 8;
    auto stats = actor_critic_update(nets, batch, gamma0, copt, aopt);
    CHECK(stats.critic_loss == doctest::Approx(want).epsilon(1e-4));
  }

  SUBCASE("a small actor step increases the policy's q-value") {
    std::vector<const Transition*> one{&storage[0]};
    RunConfig small = cfg;
    small.rl_lr = 1e-3f;
    small.polyak = 0.999f;
    Adam copt(nets.critic_params(), 1e-30f);  // keep the critic fixed
    Adam aopt(nets.policy_params(), small.rl_lr);

    auto o = Tensor::zeros({1, 3, 32, 32});
    for (size_t p = 0; p < storage[0].o.rgb.size(); ++p)
      o.data()[p] = storage[0].o.rgb[p] / 127.5f - 1.f;
    auto q_before = nets.critic(nets.encode(o), nets.policy(nets.encode(o))).item();
    for (int i = 0; i < 5; ++i) actor_critic_update(nets, one, small, copt, aopt);
    auto q_after = nets.critic(nets.encode(o), nets.policy(nets.encode(o))).item();
    CHECK(q_after > q_before);
  }
}

TEST_CASE("interactive run: zero steps returns the initialized agent") {
  auto cfg = tiny_config();
  cfg.n_pi = 0;
  cfg.n_train = 0;
  auto expert = tiny_expert(cfg);
  auto bundle = EncoderBundle::init(cfg.net(), cfg.seed);
  auto result = run_interactive(bundle, expert, cfg);
  AgentNets fresh = AgentNets::init(cfg.frame_size, Rng::derive(cfg.seed, 0x06e7).next_u64());
  CHECK(nets_params(result.nets) == nets_params(fresh));
  CHECK(result.episodes.empty());
}

TEST_CASE("interactive run is deterministic and respects the encoder cutoff") {
  auto cfg = tiny_config();
  auto expert = tiny_expert(cfg);

  auto bundle1 = EncoderBundle::init(cfg.net(), cfg.seed);
  std::vector<std::vector<float>> hashes1;
  auto r1 = run_interactive(bundle1, expert, cfg, [&](const EpisodeRow&) {
    hashes1.push_back(bundle_params(bundle1));
  });
  auto bundle2 = EncoderBundle::init(cfg.net(), cfg.seed);
  auto r2 = run_interactive(bundle2, expert, cfg);

  CHECK(nets_params(r1.nets) == nets_params(r2.nets));
  CHECK(bundle_params(bundle1) == bundle_params(bundle2));
  REQUIRE(r1.episodes.size() == r2.episodes.size());
  for (size_t i = 0; i < r1.episodes.size(); ++i) {
    CHECK(r1.episodes[i].learned_return == r2.episodes[i].learned_return);
    CHECK(r1.episodes[i].true_return == r2.episodes[i].true_return);
  }

  // Encoder updates stop after n_train steps and the bundle stays frozen.
  bool any_update = false;
  for (size_t i = 0; i < r1.episodes.size(); ++i) {
    const auto& row = r1.episodes[i];
    if (row.encoder_updated) any_update = true;
    CHECK((row.step <= cfg.n_train || !row.encoder_updated));
  }
  CHECK(any_update);
  bool frozen_seen = false;
  for (size_t i = 1; i < hashes1.size(); ++i) {
    if (r1.episodes[i].step > cfg.n_train) {
      CHECK(hashes1[i] == hashes1[i - 1]);
      frozen_seen = true;
    }
  }
  CHECK(frozen_seen);
}

TEST_CASE("interactive run with zero encoder budget never touches the bundle") {
  auto cfg = tiny_config();
  cfg.n_train = 0;
  auto expert = tiny_expert(cfg);
  auto bundle = EncoderBundle::init(cfg.net(), cfg.seed);
  auto before = bundle_params(bundle);
  run_interactive(bundle, expert, cfg);
  CHECK(bundle_params(bundle) == before);
}

TEST_CASE("evaluation baselines anchor the scaled return") {
  auto cfg = tiny_config();
  auto expert_eval = evaluate_reference(PolicyKind::kExpert, EnvId::kPointReach,
                                        cfg.frame_size, 40, 10, 3);
  CHECK(expert_eval.scaled_return == doctest::Approx(1.0));
  auto random_eval = evaluate_reference(PolicyKind::kRandom, EnvId::kPointReach,
                                        cfg.frame_size, 40, 10, 3);
  CHECK(random_eval.scaled_return == doctest::Approx(0.0));
  CHECK(expert_eval.mean_return > random_eval.mean_return);
}
