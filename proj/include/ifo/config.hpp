#ifndef IFO_CONFIG_HPP_
#define IFO_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "ifo/losses.hpp"
#include "ifo/nets.hpp"

namespace ifo {

// Every hyperparameter of a run. The desk profile is the default and is
// sized for a laptop CPU; the paper profile carries the published values.
struct RunConfig {
  std::string profile = "desk";

  // Environment and datasets.
  std::string env = "point_reach";
  int n_trajectories = 200;  // per distribution
  int episode_steps = 40;    // frames per trajectory = episode_steps + 1
  int frame_size = 32;

  // Networks.
  std::string net_scale = "desk";
  float leaky_slope = 0.2f;

  // Losses.
  float tau = 0.07f;
  float rho = 1.0f;
  int dpc_horizon = 3;
  int seq_negatives = 8;

  // Alignment phase.
  int n_pretrain = 200;
  int batch_pairs = 16;
  float lr = 1e-4f;
  float holdout_fraction = 0.1f;

  // Interactive phase.
  long long n_pi = 60000;
  long long n_train = 15000;
  int n_update = 50;
  float exploration_noise = 0.2f;
  float discount = 0.99f;
  float polyak = 0.995f;
  int replay_capacity = 100000;
  int rl_batch = 64;
  float rl_lr = 1e-4f;
  int interact_batch_pairs = 8;
  int agent_buffer_capacity = 512;
  int warmup_steps = 1000;
  long long eval_interval = 5000;
  int eval_episodes = 20;

  uint64_t seed = 1;

  static RunConfig desk();
  static RunConfig paper();
  static RunConfig from_profile(const std::string& profile);

  NetScale net() const;
  LossParams loss_params() const;
  void validate() const;

  std::string to_json() const;
  static RunConfig from_json_text(const std::string& text);
  void save(const std::string& path) const;
  static RunConfig load(const std::string& path);
};

}  // namespace ifo

#endif  // IFO_CONFIG_HPP_
