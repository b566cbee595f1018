#include <filesystem>

#include "doctest.h"
#include "ifo/config.hpp"

using namespace ifo;

TEST_CASE("paper profile carries the published hyperparameters verbatim") {
  auto cfg = RunConfig::paper();
  CHECK(cfg.n_trajectories == 5000);
  CHECK(cfg.episode_steps + 1 == 61);  // frames per trajectory
  CHECK(cfg.frame_size == 64);
  CHECK(cfg.n_pretrain == 8000);
  CHECK(cfg.batch_pairs == 16);
  CHECK(cfg.n_train == 375000);
  CHECK(cfg.n_update == 50);
  CHECK(cfg.n_pi == 1550000);
  CHECK(cfg.lr == 1e-4f);
  cfg.validate();
}

TEST_CASE("desk profile is the default and validates") {
  auto cfg = RunConfig::desk();
  CHECK(cfg.profile == "desk");
  CHECK(cfg.n_trajectories == 200);
  CHECK(cfg.episode_steps == 40);
  CHECK(cfg.frame_size == 32);
  CHECK(cfg.n_pretrain == 200);
  CHECK(cfg.n_pi == 60000);
  CHECK(cfg.n_train == 15000);
  CHECK(cfg.n_update == 50);
  cfg.validate();
}

TEST_CASE("config serializes losslessly through json") {
  auto cfg = RunConfig::paper();
  cfg.seed = 987654321;
  cfg.tau = 0.123f;
  cfg.n_pi = 123456789LL;
  auto back = RunConfig::from_json_text(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.seed == cfg.seed);
  CHECK(back.tau == cfg.tau);
  CHECK(back.n_pi == cfg.n_pi);
  CHECK(back.net_scale == "paper");
}

TEST_CASE("config validation rejects bad values") {
  auto cfg = RunConfig::desk();
  cfg.n_trajectories = 0;
  CHECK_THROWS_AS(cfg.validate(), ValueError);
  cfg = RunConfig::desk();
  cfg.tau = 0.f;
  CHECK_THROWS_AS(cfg.validate(), ValueError);
  cfg = RunConfig::desk();
  cfg.n_train = cfg.n_pi + 1;
  CHECK_THROWS_AS(cfg.validate(), ValueError);
  cfg = RunConfig::desk();
  cfg.frame_size = 64;  // disagrees with the desk net scale
  CHECK_THROWS_AS(cfg.validate(), ValueError);
  CHECK_THROWS_AS(RunConfig::from_profile("huge"), ValueError);
  CHECK_THROWS_AS(RunConfig::from_json_text("{not json"), ValueError);
}

TEST_CASE("config file save and load") {
  auto path = (std::filesystem::temp_directory_path() / "ifo_cfg.json").string();
  auto cfg = RunConfig::desk();
  cfg.seed = 42;
  cfg.save(path);
  auto back = RunConfig::load(path);
  CHECK(back.seed == 42);
  CHECK(back.to_json() == cfg.to_json());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(RunConfig::load(path), IoError);
}
