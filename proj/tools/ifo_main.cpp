// Command-line front end: dataset generation, encoder alignment, agent
// training, evaluation, and embedding export. Exit codes: 0 success,
// 1 runtime or I/O failure, 2 usage or configuration error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ifo/align.hpp"
#include "ifo/checkpoint.hpp"
#include "ifo/config.hpp"
#include "ifo/env.hpp"
#include "ifo/interact.hpp"

namespace fs = std::filesystem;
using namespace ifo;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("IFO_OUT_DIR");
  return env && *env ? std::string(env) : std::string(".");
}

// Single-writer guard per output directory.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(fs::path(dir) / ".ifo.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream probe;
    if (fs::exists(path_))
      throw IoError("output directory is locked by another command: " +
                    path_.string());
    probe.open(path_, std::ios::out | std::ios::trunc);
    if (!probe) throw IoError("cannot create lock file: " + path_.string());
    probe << "locked\n";
    held_ = true;
  }
  ~DirLock() {
    if (held_) {
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }

 private:
  fs::path path_;
  bool held_ = false;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct CommonOpts {
  std::string out_dir = default_out_dir();
  std::string config_path;
  std::string profile;
  long long seed = -1;
  std::string env;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--out-dir", opts.out_dir, "Output directory")
      ->capture_default_str();
  cmd->add_option("--config", opts.config_path, "Run configuration JSON file");
  cmd->add_option("--profile", opts.profile, "Configuration profile (desk|paper)");
  cmd->add_option("--seed", opts.seed, "Run seed (overrides config)");
  cmd->add_option("--env", opts.env, "Environment id (point_reach|point_push)");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty())
    cfg = RunConfig::load(opts.config_path);
  else if (!opts.profile.empty())
    cfg = RunConfig::from_profile(opts.profile);
  if (!opts.profile.empty() && !opts.config_path.empty())
    throw ValueError("--profile and --config are mutually exclusive");
  if (opts.seed >= 0) cfg.seed = static_cast<uint64_t>(opts.seed);
  if (!opts.env.empty()) cfg.env = opts.env;
  cfg.validate();
  return cfg;
}

TrajectoryDataset subset_dataset(const TrajectoryDataset& ds,
                                 const TrajectoryRefs& refs) {
  TrajectoryDataset out;
  out.env_id = ds.env_id;
  out.episode_steps = ds.episode_steps;
  out.frame_size = ds.frame_size;
  out.seed = ds.seed;
  out.policy = ds.policy;
  for (const auto* t : refs) out.trajectories.push_back(*t);
  return out;
}

int cmd_generate(const CommonOpts& common, const std::string& policy_str, int n,
                 int t, const std::string& out_name) {
  RunConfig cfg = resolve_config(common);
  const PolicyKind policy = policy_kind_from_string(policy_str);
  check_value(n >= 1, "--n must be >= 1");
  check_value(t >= 2, "--t must be >= 2");
  DirLock lock(common.out_dir);
  auto ds = generate_dataset(env_id_from_string(cfg.env), policy, n, t,
                             cfg.frame_size, cfg.seed);
  const std::string name =
      out_name.empty() ? cfg.env + "_" + policy_str + ".ifods" : out_name;
  const std::string path = (fs::path(common.out_dir) / name).string();
  save_dataset(ds, path);
  std::cout << "dataset env=" << cfg.env << " policy=" << policy_str
            << " n=" << n << " t=" << t << " frame=" << cfg.frame_size
            << " seed=" << cfg.seed << " -> " << path << "\n";
  double mean_ret = 0;
  for (const auto& traj : ds.trajectories) mean_ret += traj.true_return;
  mean_ret /= static_cast<double>(ds.trajectories.size());
  std::cout << "mean true return " << fmt(mean_ret) << "\n";
  return 0;
}

void write_align_metrics(const std::string& path,
                         const std::vector<LossReport>& rows,
                         const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open metrics file: " + path);
  out << "# command=align seed=" << cfg.seed << " n_pretrain=" << cfg.n_pretrain
      << " batch_pairs=" << cfg.batch_pairs << "\n";
  out << "step,l_triplet,l_ae,l_s,l_z,l_o,l_total\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << i << "," << fmt(r.l_triplet) << "," << fmt(r.l_ae) << ","
        << fmt(r.l_s) << "," << fmt(r.l_z) << "," << fmt(r.l_o) << ","
        << fmt(r.l_total) << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

int cmd_align(const CommonOpts& common, const std::string& expert_path,
              const std::string& random_path, int n_pretrain_override) {
  RunConfig cfg = resolve_config(common);
  if (n_pretrain_override >= 0) cfg.n_pretrain = n_pretrain_override;
  DirLock lock(common.out_dir);

  auto expert = load_dataset(expert_path);
  auto random = load_dataset(random_path);
  auto e_split = holdout_split(expert, cfg.holdout_fraction);
  auto r_split = holdout_split(random, cfg.holdout_fraction);
  auto e_train = subset_dataset(expert, e_split.train);
  auto r_train = subset_dataset(random, r_split.train);

  EncoderBundle untrained = EncoderBundle::init(cfg.net(), cfg.seed);
  const double auc_before =
      separation_score(untrained, e_split.held_out, r_split.held_out);

  std::vector<LossReport> rows;
  EncoderBundle bundle =
      run_alignment(e_train, r_train, cfg,
                    [&](int, const LossReport& r) { rows.push_back(r); });
  const double auc_after =
      separation_score(bundle, e_split.held_out, r_split.held_out);

  const fs::path dir(common.out_dir);
  Checkpoint ck;
  ck.add_registry(bundle.registry());
  ck.save((dir / "align_ckpt.ifoc").string());
  write_align_metrics((dir / "align_metrics.csv").string(), rows, cfg);
  cfg.save((dir / "align_config.json").string());
  {
    std::ofstream rep(dir / "separation_report.csv", std::ios::trunc);
    rep << "bundle,auc\nuntrained," << fmt(auc_before) << "\naligned,"
        << fmt(auc_after) << "\n";
  }
  std::cout << "alignment finished: epochs=" << rows.size()
            << " auc_untrained=" << fmt(auc_before)
            << " auc_aligned=" << fmt(auc_after) << "\n";
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& expert_path,
              const std::string& ckpt_path, bool no_alignment,
              long long n_train_override, long long n_pi_override) {
  RunConfig cfg = resolve_config(common);
  if (n_train_override >= 0) cfg.n_train = n_train_override;
  if (n_pi_override >= 0) cfg.n_pi = n_pi_override;
  cfg.validate();
  DirLock lock(common.out_dir);

  auto expert = load_dataset(expert_path);
  EncoderBundle bundle = EncoderBundle::init(cfg.net(), cfg.seed);
  if (no_alignment) {
    check_value(ckpt_path.empty(),
                "--checkpoint and --no-alignment are mutually exclusive");
  } else {
    check_value(!ckpt_path.empty(),
                "--checkpoint required unless --no-alignment is given");
    Checkpoint::load(ckpt_path).restore_registry(bundle.registry());
  }

  const fs::path dir(common.out_dir);
  std::ofstream metrics(dir / "train_metrics.csv", std::ios::trunc);
  if (!metrics) throw IoError("cannot open train metrics file");
  metrics << "# command=train seed=" << cfg.seed
          << " no_alignment=" << (no_alignment ? 1 : 0)
          << " n_pi=" << cfg.n_pi << " n_train=" << cfg.n_train
          << " n_update=" << cfg.n_update << "\n";
  metrics << "step,learned_return,true_return,scaled_return,"
             "l_triplet,l_ae,l_s,l_z,l_o,l_total\n";

  auto result = run_interactive(
      bundle, expert, cfg, [&](const EpisodeRow& row) {
        metrics << row.step << "," << fmt(row.learned_return) << ","
                << fmt(row.true_return) << "," << fmt(row.scaled_return);
        if (row.encoder_updated) {
          const auto& l = row.losses;
          metrics << "," << fmt(l.l_triplet) << "," << fmt(l.l_ae) << ","
                  << fmt(l.l_s) << "," << fmt(l.l_z) << "," << fmt(l.l_o) << ","
                  << fmt(l.l_total);
        } else {
          metrics << ",,,,,,";
        }
        metrics << "\n";
      });

  Checkpoint agent_ck;
  agent_ck.add_registry(result.nets.registry());
  agent_ck.save((dir / "agent_ckpt.ifoc").string());
  Checkpoint bundle_ck;
  bundle_ck.add_registry(bundle.registry());
  bundle_ck.save((dir / "bundle_ckpt.ifoc").string());
  cfg.save((dir / "train_config.json").string());
  {
    std::ofstream ev(dir / "final_eval.csv", std::ios::trunc);
    ev << "episodes,mean_return,stddev_return,scaled_return,expert_return,"
          "random_return\n";
    ev << cfg.eval_episodes << "," << fmt(result.final_eval.mean_return) << ","
       << fmt(result.final_eval.stddev_return) << ","
       << fmt(result.final_eval.scaled_return) << ","
       << fmt(result.final_eval.expert_return) << ","
       << fmt(result.final_eval.random_return) << "\n";
  }
  std::cout << "training finished: episodes=" << result.episodes.size()
            << " final_scaled_return=" << fmt(result.final_eval.scaled_return)
            << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& ckpt_path,
             const std::string& policy_str, int episodes) {
  RunConfig cfg = resolve_config(common);
  check_value(episodes >= 1, "--episodes must be >= 1");
  DirLock lock(common.out_dir);
  const EnvId env_id = env_id_from_string(cfg.env);

  EvalResult res;
  if (policy_str == "agent") {
    check_value(!ckpt_path.empty(), "--checkpoint required for agent policy");
    AgentNets nets = AgentNets::init(cfg.frame_size,
                                     Rng::derive(cfg.seed, 0x06e7).next_u64());
    Checkpoint::load(ckpt_path).restore_registry(nets.registry());
    res = evaluate_agent(nets, env_id, cfg.frame_size, cfg.episode_steps,
                         episodes, cfg.seed);
  } else {
    res = evaluate_reference(policy_kind_from_string(policy_str), env_id,
                             cfg.frame_size, cfg.episode_steps, episodes,
                             cfg.seed);
  }

  const fs::path dir(common.out_dir);
  std::ofstream rep(dir / "eval_report.csv", std::ios::trunc);
  rep << "policy,episodes,mean_return,stddev_return,scaled_return,"
         "expert_return,random_return\n";
  rep << policy_str << "," << episodes << "," << fmt(res.mean_return) << ","
      << fmt(res.stddev_return) << "," << fmt(res.scaled_return) << ","
      << fmt(res.expert_return) << "," << fmt(res.random_return) << "\n";
  std::cout << "eval policy=" << policy_str << " mean_return="
            << fmt(res.mean_return) << " +- " << fmt(res.stddev_return)
            << " scaled_return=" << fmt(res.scaled_return) << "\n";
  return 0;
}

int cmd_export(const CommonOpts& common, const std::string& ckpt_path,
               const std::string& dataset_path) {
  RunConfig cfg = resolve_config(common);
  DirLock lock(common.out_dir);
  auto ds = load_dataset(dataset_path);
  check_value(ds.frame_size == cfg.frame_size,
              "dataset frame size does not match configuration");
  EncoderBundle bundle = EncoderBundle::init(cfg.net(), cfg.seed);
  Checkpoint::load(ckpt_path).restore_registry(bundle.registry());

  const fs::path dir(common.out_dir);
  std::ofstream out(dir / "embeddings.csv", std::ios::trunc);
  if (!out) throw IoError("cannot open embeddings file");
  out << "label";
  for (int j = 0; j < bundle.scale.embed_dim; ++j) out << ",z" << j;
  out << "\n";
  for (const auto& traj : ds.trajectories) {
    auto z = trajectory_embedding(bundle, traj);
    out << policy_kind_to_string(traj.label);
    for (float v : z) out << "," << fmt(v);
    out << "\n";
  }
  std::cout << "exported " << ds.trajectories.size() << " embeddings\n";
  return 0;
}

int cmd_config_init(const CommonOpts& common) {
  RunConfig cfg = resolve_config(common);
  DirLock lock(common.out_dir);
  const std::string path =
      (fs::path(common.out_dir) / "run_config.json").string();
  cfg.save(path);
  std::cout << "wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Imitation-from-observation trainer with contrastive "
               "trajectory embeddings"};
  app.require_subcommand(1);

  CommonOpts gen_opts, align_opts, train_opts, eval_opts, export_opts, cfg_opts;

  auto* gen = app.add_subcommand("generate", "Generate a trajectory dataset");
  std::string gen_policy = "expert", gen_out;
  int gen_n = 200, gen_t = 40;
  add_common(gen, gen_opts);
  gen->add_option("--policy", gen_policy, "expert|random")->capture_default_str();
  gen->add_option("--n", gen_n, "Number of trajectories")->capture_default_str();
  gen->add_option("--t", gen_t, "Episode steps (frames = t+1)")->capture_default_str();
  gen->add_option("--out", gen_out, "Output file name inside --out-dir");

  auto* align = app.add_subcommand("align", "Train the encoding functions");
  std::string align_expert, align_random;
  int align_pretrain = -1;
  add_common(align, align_opts);
  align->add_option("--expert", align_expert, "Expert dataset")->required();
  align->add_option("--random", align_random, "Random dataset")->required();
  align->add_option("--n-pretrain", align_pretrain, "Override alignment epochs");

  auto* train = app.add_subcommand("train", "Train the agent with the learned reward");
  std::string train_expert, train_ckpt;
  bool train_no_alignment = false;
  long long train_ntrain = -1, train_npi = -1;
  add_common(train, train_opts);
  train->add_option("--expert", train_expert, "Expert dataset")->required();
  train->add_option("--checkpoint", train_ckpt, "Aligned encoder checkpoint");
  train->add_flag("--no-alignment", train_no_alignment,
                  "Start from freshly initialized encoders");
  train->add_option("--n-train", train_ntrain, "Override encoder-update cutoff");
  train->add_option("--n-pi", train_npi, "Override total agent steps");

  auto* eval = app.add_subcommand("eval", "Evaluate a policy");
  std::string eval_ckpt, eval_policy = "agent";
  int eval_episodes = 20;
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_ckpt, "Agent checkpoint");
  eval->add_option("--policy", eval_policy, "agent|expert|random")
      ->capture_default_str();
  eval->add_option("--episodes", eval_episodes, "Evaluation episodes")
      ->capture_default_str();

  auto* exp = app.add_subcommand("export-embeddings",
                                 "Write per-trajectory embeddings to CSV");
  std::string exp_ckpt, exp_dataset;
  add_common(exp, export_opts);
  exp->add_option("--checkpoint", exp_ckpt, "Encoder checkpoint")->required();
  exp->add_option("--dataset", exp_dataset, "Trajectory dataset")->required();

  auto* cfgcmd = app.add_subcommand("config", "Configuration utilities");
  auto* cfg_init = cfgcmd->add_subcommand("init", "Write a full default config");
  add_common(cfg_init, cfg_opts);
  cfgcmd->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed())
      return cmd_generate(gen_opts, gen_policy, gen_n, gen_t, gen_out);
    if (align->parsed())
      return cmd_align(align_opts, align_expert, align_random, align_pretrain);
    if (train->parsed())
      return cmd_train(train_opts, train_expert, train_ckpt, train_no_alignment,
                       train_ntrain, train_npi);
    if (eval->parsed())
      return cmd_eval(eval_opts, eval_ckpt, eval_policy, eval_episodes);
    if (exp->parsed()) return cmd_export(export_opts, exp_ckpt, exp_dataset);
    if (cfg_init->parsed()) return cmd_config_init(cfg_opts);
  } catch (const ValueError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
