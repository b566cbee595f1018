#ifndef IFO_LOSSES_HPP_
#define IFO_LOSSES_HPP_

#include <vector>

#include "ifo/env.hpp"
#include "ifo/nets.hpp"
#include "ifo/ops.hpp"

namespace ifo {

template <class T>
struct LossParamsT {
  T tau = T(0.07);        // similarity temperature
  T rho = T(1.0);         // triplet margin
  int dpc_horizon = 3;    // prediction steps K
  int seq_negatives = 8;  // cross-distribution negatives k
};

template <class T>
struct LossReportT {
  double l_triplet = 0, l_ae = 0, l_s = 0, l_z = 0, l_o = 0, l_total = 0;
  TensorT<T> total;  // differentiable root, equals the sum of the five terms
};

// h(a,b) = exp(cos(a,b)/tau); scale-invariant in both arguments. Zero-norm
// inputs raise ValueError.
template <class T>
TensorT<T> similarity_h(const TensorT<T>& a, const TensorT<T>& b, T tau);

// ||s-s_p||^2 + max(rho - ||s-s_n||^2, 0)
template <class T>
TensorT<T> triplet_loss(const TensorT<T>& s, const TensorT<T>& s_p,
                        const TensorT<T>& s_n, T rho);

// Mean squared error over all elements (mean convention).
template <class T>
TensorT<T> ae_loss(const TensorT<T>& target, const TensorT<T>& reconstruction);

// Symmetric two-view InfoNCE over a batch of per-view encodings
// l_enc[N,D], ab_enc[N,D]; positives are matching rows, negatives the rest
// of the batch, averaged over both directions. Needs N >= 2.
template <class T>
TensorT<T> cmc_loss(const TensorT<T>& l_enc, const TensorT<T>& ab_enc, T tau);

// Predictive-coding sequence loss on one sequence of state encodings
// states[S, state_dim]. The first `context_len` states are encoded, the
// next `horizon` states are predicted open-loop, and each prediction is
// scored contrastively against all states of the same sequence. Requires
// context_len >= 1 and context_len + horizon <= S - 1 (the last prediction
// must have a true state to match).
template <class T>
TensorT<T> dpc_loss(EncoderBundleT<T>& bundle, const TensorT<T>& states,
                    int context_len, int horizon, T tau);

// -log( h(z,z_p) / (h(z,z_p) + sum_i h(z,z_n_i)) ); needs >= 1 negative.
template <class T>
TensorT<T> seq_contrast_loss(const TensorT<T>& z, const TensorT<T>& z_p,
                             const std::vector<TensorT<T>>& z_negatives, T tau);

// Full objective over a batch of sequences from the two distributions.
// Frame-level terms are evaluated on frames sampled from the same batch;
// sequence-level terms contrast within and across the distributions.
template <class T>
LossReportT<T> total_loss(EncoderBundleT<T>& bundle,
                          const std::vector<const Trajectory*>& expert,
                          const std::vector<const Trajectory*>& nonexpert,
                          const LossParamsT<T>& params, Rng& rng);

using LossParams = LossParamsT<float>;
using LossReport = LossReportT<float>;

}  // namespace ifo

#endif  // IFO_LOSSES_HPP_
