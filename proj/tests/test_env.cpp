#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "ifo/env.hpp"

using namespace ifo;

namespace {

float dist2(const Vec2& a, const Vec2& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("reset is seed-deterministic with separated start and goal") {
  PointEnv env(EnvId::kPointReach, 32);
  auto a = env.reset(42);
  auto b = env.reset(42);
  CHECK(a.position == b.position);
  CHECK(a.goal == b.goal);

  std::set<std::pair<float, float>> positions;
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    auto s = env.reset(seed);
    CHECK(dist2(s.position, s.goal) >= PointEnv::kMinSeparation);
    positions.insert({s.position[0], s.position[1]});
  }
  CHECK(positions.size() >= 999);
}

TEST_CASE("step dynamics follow the damped velocity recursion") {
  PointEnv env(EnvId::kPointReach, 32);
  EnvState s;
  s.position = {0.5f, 0.5f};
  s.velocity = {0.f, 0.f};
  s.goal = {0.9f, 0.9f};

  SUBCASE("zero velocity and zero action keep the position") {
    auto [next, r] = env.step(s, {0.f, 0.f});
    CHECK(next.position == s.position);
    CHECK(r == 0.f);
  }
  SUBCASE("inside the goal radius the hidden reward is one") {
    s.position = {0.9f, 0.9f};
    auto [next, r] = env.step(s, {0.f, 0.f});
    CHECK(r == 1.f);
  }
  SUBCASE("constant push matches the closed-form recursion with clamping") {
    EnvState cur;
    cur.position = {0.f, 0.5f};
    cur.goal = {0.1f, 0.9f};
    double v = 0.0, x = 0.0;
    for (int t = 1; t <= 20; ++t) {
      auto [next, r] = env.step(cur, {1.f, 0.f});
      v = 0.8 * v + 0.1;  // geometric series v_t = 0.5(1 - 0.8^t)
      x = std::min(x + v, 1.0);
      CHECK(next.position[0] == doctest::Approx(x).epsilon(1e-5));
      CHECK(std::abs(v - 0.5 * (1.0 - std::pow(0.8, t))) < 1e-12);
      cur = next;
    }
  }
  SUBCASE("positions stay inside the unit square for wild actions") {
    Rng rng(5);
    EnvState cur = env.reset(7);
    for (int t = 0; t < 200; ++t) {
      auto [next, r] = env.step(cur, {rng.uniformf(-5.f, 5.f), rng.uniformf(-5.f, 5.f)});
      for (int i = 0; i < 2; ++i) {
        CHECK(next.position[i] >= 0.f);
        CHECK(next.position[i] <= 1.f);
      }
      cur = next;
    }
  }
  SUBCASE("out-of-range actions are clamped and flagged") {
    bool clamped = false;
    env.step(s, {2.f, 0.f}, &clamped);
    CHECK(clamped);
    env.step(s, {0.5f, -0.5f}, &clamped);
    CHECK(!clamped);
  }
}

TEST_CASE("rendering is deterministic with distinct disc colors") {
  PointEnv env(EnvId::kPointReach, 32);
  auto s = env.reset(3);
  auto f1 = env.render(s);
  auto f2 = env.render(s);
  CHECK(f1.rgb == f2.rgb);

  // Dominant channel of agent pixels is red, goal pixels green.
  const size_t plane = 32 * 32;
  int red_px = 0, green_px = 0;
  for (size_t p = 0; p < plane; ++p) {
    const int r = f1.rgb[p], g = f1.rgb[plane + p], b = f1.rgb[2 * plane + p];
    if (r > g && r > b) ++red_px;
    if (g > r && g > b) ++green_px;
  }
  CHECK(red_px > 0);
  CHECK(green_px > 0);
  CHECK(green_px > red_px);  // goal disc is drawn larger
}

TEST_CASE("moving the agent one tenth of the arena repaints enough pixels") {
  PointEnv env(EnvId::kPointReach, 32);
  auto s = env.reset(11);
  s.position = {0.4f, 0.5f};
  auto f1 = env.render(s);
  s.position = {0.5f, 0.5f};
  auto f2 = env.render(s);
  int changed = 0;
  const size_t plane = 32 * 32;
  for (size_t p = 0; p < plane; ++p)
    if (f1.rgb[p] != f2.rgb[p] || f1.rgb[plane + p] != f2.rgb[plane + p] ||
        f1.rgb[2 * plane + p] != f2.rgb[2 * plane + p])
      ++changed;
  CHECK(changed >= static_cast<int>(plane / 100));
}

TEST_CASE("expert controller reaches the goal and beats random play") {
  PointEnv env(EnvId::kPointReach, 32);

  SUBCASE("at the goal with zero velocity the action is near zero") {
    EnvState s;
    s.position = {0.6f, 0.4f};
    s.goal = {0.6f, 0.4f};
    auto a = env.expert_action(s);
    CHECK(std::abs(a[0]) < 1e-6f);
    CHECK(std::abs(a[1]) < 1e-6f);
  }

  SUBCASE("expert reaches the goal within 40 steps in at least 95% of episodes") {
    int reached = 0;
    for (int i = 0; i < 200; ++i) {
      EnvState s = env.reset(static_cast<uint64_t>(i));
      bool ok = false;
      for (int t = 0; t < 40 && !ok; ++t) {
        auto [next, r] = env.step(s, env.expert_action(s));
        ok = r > 0.f;
        s = next;
      }
      reached += ok ? 1 : 0;
    }
    CHECK(reached >= 190);
  }

  SUBCASE("expert mean return is at least five times the random mean") {
    double expert_sum = 0, random_sum = 0;
    for (int i = 0; i < 200; ++i) {
      auto traj_e = rollout_episode(
          env, static_cast<uint64_t>(i), 40,
          [&](const EnvState& s) { return env.expert_action(s); },
          PolicyKind::kExpert, false);
      Rng arng(static_cast<uint64_t>(i) * 17 + 3);
      auto traj_r = rollout_episode(
          env, static_cast<uint64_t>(i), 40,
          [&](const EnvState&) {
            return Vec2{arng.uniformf(-1.f, 1.f), arng.uniformf(-1.f, 1.f)};
          },
          PolicyKind::kRandom, false);
      expert_sum += traj_e.true_return;
      random_sum += traj_r.true_return;
    }
    CHECK(expert_sum >= 5.0 * std::max(random_sum, 1.0));
  }
}

TEST_CASE("expert and random returns are separable at the tail percentiles") {
  PointEnv env(EnvId::kPointReach, 32);
  std::vector<float> expert, random;
  for (int i = 0; i < 200; ++i) {
    expert.push_back(rollout_episode(
                         env, static_cast<uint64_t>(i), 40,
                         [&](const EnvState& s) { return env.expert_action(s); },
                         PolicyKind::kExpert, false)
                         .true_return);
    Rng arng(static_cast<uint64_t>(i) * 31 + 7);
    random.push_back(rollout_episode(
                         env, static_cast<uint64_t>(i), 40,
                         [&](const EnvState&) {
                           return Vec2{arng.uniformf(-1.f, 1.f),
                                       arng.uniformf(-1.f, 1.f)};
                         },
                         PolicyKind::kRandom, false)
                         .true_return);
  }
  std::sort(expert.begin(), expert.end());
  std::sort(random.begin(), random.end());
  const float expert_p5 = expert[10];
  const float random_p95 = random[190];
  CHECK(expert_p5 > random_p95);
}

TEST_CASE("point_push moves the object on contact and favors the expert") {
  PointEnv env(EnvId::kPointPush, 32);
  EnvState s = env.reset(5);
  // Drive the agent straight into the object.
  s.position = {s.object[0] - 0.1f, s.object[1]};
  s.velocity = {0.f, 0.f};
  const Vec2 before = s.object;
  EnvState cur = s;
  for (int t = 0; t < 12; ++t) {
    auto [next, r] = env.step(cur, {1.f, 0.f});
    cur = next;
  }
  CHECK(dist2(cur.object, before) > 0.01f);

  double expert_sum = 0, random_sum = 0;
  for (int i = 0; i < 60; ++i) {
    expert_sum += rollout_episode(
                      env, static_cast<uint64_t>(i), 60,
                      [&](const EnvState& st) { return env.expert_action(st); },
                      PolicyKind::kExpert, false)
                      .true_return;
    Rng arng(static_cast<uint64_t>(i) * 13 + 1);
    random_sum += rollout_episode(
                      env, static_cast<uint64_t>(i), 60,
                      [&](const EnvState&) {
                        return Vec2{arng.uniformf(-1.f, 1.f),
                                    arng.uniformf(-1.f, 1.f)};
                      },
                      PolicyKind::kRandom, false)
                      .true_return;
  }
  CHECK(expert_sum > 5.0 * std::max(random_sum, 1.0));
}

TEST_CASE("dataset generation is deterministic and persists bit-exactly") {
  const std::string path1 = temp_path("ifo_ds_a.ifods");
  const std::string path2 = temp_path("ifo_ds_b.ifods");
  auto ds1 = generate_dataset(EnvId::kPointReach, PolicyKind::kRandom, 5, 6, 32, 9);
  auto ds2 = generate_dataset(EnvId::kPointReach, PolicyKind::kRandom, 5, 6, 32, 9);
  save_dataset(ds1, path1);
  save_dataset(ds2, path2);

  auto read_all = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  const auto bytes1 = read_all(path1);
  CHECK(bytes1 == read_all(path2));

  // Frames dominate the file size: N*(T+1)*3*H*W bytes plus small blocks.
  const size_t frame_bytes = 5ull * 7 * 3 * 32 * 32;
  CHECK(bytes1.size() >= frame_bytes);
  CHECK(bytes1.size() <= frame_bytes + 1024 + 5ull * 6 * 2 * 4 + 5 * 4);

  auto loaded = load_dataset(path1);
  CHECK(loaded.size() == 5);
  CHECK(loaded.episode_steps == 6);
  CHECK(loaded.frame_size == 32);
  CHECK(loaded.policy == PolicyKind::kRandom);
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded.trajectories[i].frames.size() == 7);
    CHECK(loaded.trajectories[i].true_return == ds1.trajectories[i].true_return);
    for (size_t t = 0; t < 7; ++t)
      CHECK(loaded.trajectories[i].frames[t].rgb == ds1.trajectories[i].frames[t].rgb);
    REQUIRE(loaded.trajectories[i].actions.has_value());
    CHECK(*loaded.trajectories[i].actions == *ds1.trajectories[i].actions);
  }
  std::filesystem::remove(path1);
  std::filesystem::remove(path2);
}

TEST_CASE("dataset generation validates arguments") {
  CHECK_THROWS_AS(generate_dataset(EnvId::kPointReach, PolicyKind::kExpert, 0, 6, 32, 1),
                  ValueError);
  CHECK_THROWS_AS(generate_dataset(EnvId::kPointReach, PolicyKind::kExpert, 1, 1, 32, 1),
                  ValueError);
  CHECK_THROWS_AS(env_id_from_string("nope"), ValueError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/path.ifods"), IoError);
}
