#include "ifo/config.hpp"

#include <fstream>

#include "json.hpp"

namespace ifo {

RunConfig RunConfig::desk() { return RunConfig{}; }

RunConfig RunConfig::paper() {
  RunConfig c;
  c.profile = "paper";
  c.n_trajectories = 5000;
  c.episode_steps = 60;  // 61 frames per trajectory
  c.frame_size = 64;
  c.net_scale = "paper";
  c.n_pretrain = 8000;
  c.batch_pairs = 16;
  c.lr = 1e-4f;
  c.n_pi = 1550000;
  c.n_train = 375000;
  c.n_update = 50;
  c.rl_lr = 1e-4f;
  c.interact_batch_pairs = 16;
  return c;
}

RunConfig RunConfig::from_profile(const std::string& profile) {
  if (profile == "desk") return desk();
  if (profile == "paper") return paper();
  throw ValueError("unknown profile: " + profile + " (expected desk or paper)");
}

NetScale RunConfig::net() const {
  NetScale sc;
  if (net_scale == "desk")
    sc = NetScale::desk();
  else if (net_scale == "paper")
    sc = NetScale::paper();
  else
    throw ValueError("unknown net scale: " + net_scale);
  check_value(sc.frame_size == frame_size,
              "frame_size " + std::to_string(frame_size) +
                  " does not match net scale (" + std::to_string(sc.frame_size) + ")");
  sc.leaky_slope = leaky_slope;
  return sc;
}

LossParams RunConfig::loss_params() const {
  LossParams p;
  p.tau = tau;
  p.rho = rho;
  p.dpc_horizon = dpc_horizon;
  p.seq_negatives = seq_negatives;
  return p;
}

void RunConfig::validate() const {
  check_value(n_trajectories >= 1, "n_trajectories must be >= 1");
  check_value(episode_steps >= 2, "episode_steps must be >= 2");
  check_value(frame_size >= 8, "frame_size must be >= 8");
  check_value(tau > 0.f, "tau must be positive");
  check_value(rho > 0.f, "rho must be positive");
  check_value(dpc_horizon >= 1, "dpc_horizon must be >= 1");
  check_value(seq_negatives >= 1, "seq_negatives must be >= 1");
  check_value(n_pretrain >= 0, "n_pretrain must be >= 0");
  check_value(batch_pairs >= 2, "batch_pairs must be >= 2");
  check_value(lr > 0.f && rl_lr > 0.f, "learning rates must be positive");
  check_value(holdout_fraction > 0.f && holdout_fraction < 1.f,
              "holdout_fraction must be in (0,1)");
  check_value(n_pi >= 0, "n_pi must be >= 0");
  check_value(n_train <= n_pi, "n_train must be <= n_pi");
  check_value(n_update >= 1, "n_update must be >= 1");
  check_value(discount >= 0.f && discount < 1.f, "discount must be in [0,1)");
  check_value(polyak >= 0.f && polyak < 1.f, "polyak must be in [0,1)");
  check_value(replay_capacity >= rl_batch, "replay capacity below batch size");
  check_value(rl_batch >= 1, "rl_batch must be >= 1");
  check_value(interact_batch_pairs >= 2, "interact_batch_pairs must be >= 2");
  check_value(agent_buffer_capacity >= 2, "agent_buffer_capacity must be >= 2");
  check_value(warmup_steps >= 0, "warmup_steps must be >= 0");
  check_value(eval_interval >= 1, "eval_interval must be >= 1");
  check_value(eval_episodes >= 1, "eval_episodes must be >= 1");
  env_id_from_string(env);
  net();  // validates scale/frame agreement
}

namespace {
using nlohmann::json;

json to_json_obj(const RunConfig& c) {
  return json{{"profile", c.profile},
              {"env", c.env},
              {"n_trajectories", c.n_trajectories},
              {"episode_steps", c.episode_steps},
              {"frame_size", c.frame_size},
              {"net_scale", c.net_scale},
              {"leaky_slope", c.leaky_slope},
              {"tau", c.tau},
              {"rho", c.rho},
              {"dpc_horizon", c.dpc_horizon},
              {"seq_negatives", c.seq_negatives},
              {"n_pretrain", c.n_pretrain},
              {"batch_pairs", c.batch_pairs},
              {"lr", c.lr},
              {"holdout_fraction", c.holdout_fraction},
              {"n_pi", c.n_pi},
              {"n_train", c.n_train},
              {"n_update", c.n_update},
              {"exploration_noise", c.exploration_noise},
              {"discount", c.discount},
              {"polyak", c.polyak},
              {"replay_capacity", c.replay_capacity},
              {"rl_batch", c.rl_batch},
              {"rl_lr", c.rl_lr},
              {"interact_batch_pairs", c.interact_batch_pairs},
              {"agent_buffer_capacity", c.agent_buffer_capacity},
              {"warmup_steps", c.warmup_steps},
              {"eval_interval", c.eval_interval},
              {"eval_episodes", c.eval_episodes},
              {"seed", c.seed}};
}

template <class T>
void read_field(const json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}
}  // namespace

std::string RunConfig::to_json() const { return to_json_obj(*this).dump(2) + "\n"; }

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValueError(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  if (j.contains("profile")) c = from_profile(j.at("profile").get<std::string>());
  try {
    read_field(j, "env", &c.env);
    read_field(j, "n_trajectories", &c.n_trajectories);
    read_field(j, "episode_steps", &c.episode_steps);
    read_field(j, "frame_size", &c.frame_size);
    read_field(j, "net_scale", &c.net_scale);
    read_field(j, "leaky_slope", &c.leaky_slope);
    read_field(j, "tau", &c.tau);
    read_field(j, "rho", &c.rho);
    read_field(j, "dpc_horizon", &c.dpc_horizon);
    read_field(j, "seq_negatives", &c.seq_negatives);
    read_field(j, "n_pretrain", &c.n_pretrain);
    read_field(j, "batch_pairs", &c.batch_pairs);
    read_field(j, "lr", &c.lr);
    read_field(j, "holdout_fraction", &c.holdout_fraction);
    read_field(j, "n_pi", &c.n_pi);
    read_field(j, "n_train", &c.n_train);
    read_field(j, "n_update", &c.n_update);
    read_field(j, "exploration_noise", &c.exploration_noise);
    read_field(j, "discount", &c.discount);
    read_field(j, "polyak", &c.polyak);
    read_field(j, "replay_capacity", &c.replay_capacity);
    read_field(j, "rl_batch", &c.rl_batch);
    read_field(j, "rl_lr", &c.rl_lr);
    read_field(j, "interact_batch_pairs", &c.interact_batch_pairs);
    read_field(j, "agent_buffer_capacity", &c.agent_buffer_capacity);
    read_field(j, "warmup_steps", &c.warmup_steps);
    read_field(j, "eval_interval", &c.eval_interval);
    read_field(j, "eval_episodes", &c.eval_episodes);
    read_field(j, "seed", &c.seed);
  } catch (const json::exception& e) {
    throw ValueError(std::string("config field error: ") + e.what());
  }
  return c;
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open config for writing: " + path);
  out << to_json();
  if (!out) throw IoError("write failed for config: " + path);
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

}  // namespace ifo
