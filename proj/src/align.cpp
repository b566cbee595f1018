#include "ifo/align.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ifo {

std::vector<float> trajectory_embedding(EncoderBundle& bundle,
                                        const Trajectory& traj) {
  check_contract(!traj.frames.empty(), "trajectory has no frames");
  std::vector<LabViews> views;
  views.reserve(traj.frames.size());
  for (const auto& f : traj.frames) views.push_back(rgb_to_lab(f));
  std::vector<const LabViews*> ptrs;
  for (const auto& v : views) ptrs.push_back(&v);
  auto [l, ab] = lab_batch_tensors<float>(ptrs);
  auto states = bundle.encode_views(l, ab, /*training=*/false);
  auto [z, carry] = bundle.encode_sequence(states);
  (void)carry;
  return z.data();
}

namespace {

TrajectoryRefs sample_refs(const std::vector<Trajectory>& pool, int count,
                           Rng& rng) {
  std::vector<int> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  const int take = std::min<int>(count, static_cast<int>(pool.size()));
  TrajectoryRefs out;
  for (int i = 0; i < take; ++i)
    out.push_back(&pool[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
  return out;
}

}  // namespace

void alignment_step(EncoderBundle& bundle, const TrajectoryRefs& expert,
                    const TrajectoryRefs& nonexpert, const LossParams& params,
                    Adam& opt, Rng& rng, LossReport* report) {
  TapeScope scope;
  auto rep = total_loss(bundle, expert, nonexpert, params, rng);
  scope.backward(rep.total);
  opt.step();
  opt.zero_grad();
  if (report) *report = rep;
}

EncoderBundle run_alignment(
    const TrajectoryDataset& expert, const TrajectoryDataset& random,
    const RunConfig& cfg,
    const std::function<void(int, const LossReport&)>& on_epoch) {
  check_contract(!expert.trajectories.empty() && !random.trajectories.empty(),
                 "alignment needs nonempty datasets");
  check_contract(expert.frame_size == random.frame_size,
                 "alignment datasets disagree on frame size");
  check_contract(expert.frame_size == cfg.frame_size,
                 "dataset frame size does not match configuration");

  EncoderBundle bundle = EncoderBundle::init(cfg.net(), cfg.seed);
  if (cfg.n_pretrain == 0) return bundle;

  Adam opt(bundle.trainable_params(), cfg.lr);
  Rng rng = Rng::derive(cfg.seed, 0xa119);
  const LossParams params = cfg.loss_params();
  for (int epoch = 0; epoch < cfg.n_pretrain; ++epoch) {
    auto e_batch = sample_refs(expert.trajectories, cfg.batch_pairs, rng);
    auto r_batch = sample_refs(random.trajectories, cfg.batch_pairs, rng);
    LossReport rep;
    alignment_step(bundle, e_batch, r_batch, params, opt, rng, &rep);
    if (on_epoch) on_epoch(epoch, rep);
  }
  return bundle;
}

double auc_score(const std::vector<double>& positives,
                 const std::vector<double>& negatives) {
  check_contract(!positives.empty() && !negatives.empty(),
                 "auc needs both classes");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(positives.size() + negatives.size());
  for (double s : positives) items.push_back({s, true});
  for (double s : negatives) items.push_back({s, false});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });

  // Rank-sum with average ranks across ties.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < items.size()) {
    size_t j = i;
    while (j + 1 < items.size() && items[j + 1].score == items[i].score) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t k = i; k <= j; ++k)
      if (items[k].positive) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(positives.size());
  const double n = static_cast<double>(negatives.size());
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

double separation_score(EncoderBundle& bundle, const TrajectoryRefs& experts,
                        const TrajectoryRefs& randoms) {
  check_contract(experts.size() >= 2 && randoms.size() >= 2,
                 "separation_score needs at least 2 trajectories per set");
  const size_t calib = (experts.size() + 1) / 2;

  std::vector<std::vector<float>> expert_z;
  expert_z.reserve(experts.size());
  for (const auto* t : experts) expert_z.push_back(trajectory_embedding(bundle, *t));

  const size_t dim = expert_z.front().size();
  std::vector<double> mu(dim, 0.0);
  for (size_t i = 0; i < calib; ++i)
    for (size_t j = 0; j < dim; ++j) mu[j] += expert_z[i][j];
  for (double& v : mu) v /= static_cast<double>(calib);

  auto score_of = [&](const std::vector<float>& z) {
    double d2 = 0.0;
    for (size_t j = 0; j < dim; ++j) {
      const double d = z[j] - mu[j];
      d2 += d * d;
    }
    return -std::sqrt(d2);
  };

  std::vector<double> pos_scores, neg_scores;
  for (size_t i = calib; i < expert_z.size(); ++i)
    pos_scores.push_back(score_of(expert_z[i]));
  if (pos_scores.empty()) pos_scores.push_back(score_of(expert_z.back()));
  for (const auto* t : randoms)
    neg_scores.push_back(score_of(trajectory_embedding(bundle, *t)));
  return auc_score(pos_scores, neg_scores);
}

HoldoutSplit holdout_split(const TrajectoryDataset& ds, float holdout_fraction) {
  check_value(holdout_fraction > 0.f && holdout_fraction < 1.f,
              "holdout fraction must be in (0,1)");
  HoldoutSplit split;
  const size_t n = ds.trajectories.size();
  size_t held = static_cast<size_t>(std::lround(holdout_fraction * static_cast<double>(n)));
  held = std::max<size_t>(held, 2);
  check_contract(held < n, "dataset too small for holdout split");
  for (size_t i = 0; i < n - held; ++i) split.train.push_back(&ds.trajectories[i]);
  for (size_t i = n - held; i < n; ++i)
    split.held_out.push_back(&ds.trajectories[i]);
  return split;
}

}  // namespace ifo
