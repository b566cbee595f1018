#ifndef IFO_ALIGN_HPP_
#define IFO_ALIGN_HPP_

#include <functional>
#include <vector>

#include "ifo/config.hpp"
#include "ifo/env.hpp"
#include "ifo/losses.hpp"
#include "ifo/nets.hpp"

namespace ifo {

using TrajectoryRefs = std::vector<const Trajectory*>;

// Sequence embedding z of one trajectory under the current bundle,
// eval mode, no gradient recording.
std::vector<float> trajectory_embedding(EncoderBundle& bundle,
                                        const Trajectory& traj);

// Trains the encoding functions on the expert-vs-random distributions.
// Each epoch draws one batch of `batch_pairs` sequences per distribution
// and applies one optimizer step; with n_pretrain == 0 the returned bundle
// is exactly the seeded initialization. The optional callback sees every
// epoch's loss report.
EncoderBundle run_alignment(
    const TrajectoryDataset& expert, const TrajectoryDataset& random,
    const RunConfig& cfg,
    const std::function<void(int, const LossReport&)>& on_epoch = nullptr);

// Same optimization loop, continuing from an existing bundle (used by the
// interactive phase's encoder updates and by tests).
void alignment_step(EncoderBundle& bundle, const TrajectoryRefs& expert,
                    const TrajectoryRefs& nonexpert, const LossParams& params,
                    Adam& opt, Rng& rng, LossReport* report);

// Expert-vs-random ranking quality of the embedding. Trajectories are
// scored by negative distance to the mean expert embedding, the mean taken
// over a calibration half of the expert set; the AUC is computed over the
// remaining experts against all given random trajectories. 0.5 is chance.
double separation_score(EncoderBundle& bundle, const TrajectoryRefs& experts,
                        const TrajectoryRefs& randoms);

// Deterministic 90/10-style split by trajectory index.
struct HoldoutSplit {
  TrajectoryRefs train;
  TrajectoryRefs held_out;
};
HoldoutSplit holdout_split(const TrajectoryDataset& ds, float holdout_fraction);

// Area under the ROC curve with average ranks for ties.
double auc_score(const std::vector<double>& positives,
                 const std::vector<double>& negatives);

}  // namespace ifo

#endif  // IFO_ALIGN_HPP_
