#include "ifo/losses.hpp"

#include <algorithm>
#include <cmath>

namespace ifo {
namespace {

// logits as [n] vector from scalar cosine graphs, scaled by 1/tau.
template <class T>
TensorT<T> logits_vector(const std::vector<TensorT<T>>& cosines, T tau) {
  auto v = concat_last(cosines);
  return scale(v, T(1) / tau);
}

// -log(exp(l_pos) / sum_j exp(l_j)) given the positive's position.
template <class T>
TensorT<T> info_nce(const TensorT<T>& logits, int positive_index) {
  auto pos = slice_last(logits, positive_index, 1);
  return sub(logsumexp(logits), reshape(pos, {1}));
}

}  // namespace

template <class T>
TensorT<T> similarity_h(const TensorT<T>& a, const TensorT<T>& b, T tau) {
  check_value(tau > T(0), "similarity temperature must be positive");
  return exp(scale(cosine(a, b), T(1) / tau));
}

template <class T>
TensorT<T> triplet_loss(const TensorT<T>& s, const TensorT<T>& s_p,
                        const TensorT<T>& s_n, T rho) {
  check_dim(s.shape() == s_p.shape() && s.shape() == s_n.shape(),
            "triplet_loss: dimension mismatch");
  check_value(rho > T(0), "triplet margin must be positive");
  auto pull = squared_norm(sub(s, s_p));
  auto hinge = leaky_relu(shift(neg(squared_norm(sub(s, s_n))), rho), T(0));
  return add(pull, hinge);
}

template <class T>
TensorT<T> ae_loss(const TensorT<T>& target, const TensorT<T>& reconstruction) {
  check_dim(target.shape() == reconstruction.shape(), "ae_loss: shape mismatch");
  auto diff = sub(target, reconstruction);
  return mean(mul(diff, diff));
}

template <class T>
TensorT<T> cmc_loss(const TensorT<T>& l_enc, const TensorT<T>& ab_enc, T tau) {
  check_dim(l_enc.ndim() == 2 && ab_enc.ndim() == 2 &&
                l_enc.shape() == ab_enc.shape(),
            "cmc_loss: expects matching [N,D] encodings");
  check_value(tau > T(0), "similarity temperature must be positive");
  const int n = l_enc.dim(0);
  check_contract(n >= 2, "cmc_loss needs a batch of at least 2 for negatives");

  std::vector<TensorT<T>> l_rows, ab_rows;
  for (int i = 0; i < n; ++i) {
    l_rows.push_back(row(l_enc, i));
    ab_rows.push_back(row(ab_enc, i));
  }
  // cos_mat[i][j] = cos(L_i, ab_j); reused transposed for the other view.
  std::vector<std::vector<TensorT<T>>> cos_mat(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cos_mat[static_cast<size_t>(i)].push_back(cosine(l_rows[static_cast<size_t>(i)],
                                                       ab_rows[static_cast<size_t>(j)]));

  std::vector<TensorT<T>> terms;
  for (int i = 0; i < n; ++i)
    terms.push_back(info_nce(logits_vector(cos_mat[static_cast<size_t>(i)], tau), i));
  for (int j = 0; j < n; ++j) {
    std::vector<TensorT<T>> col;
    for (int i = 0; i < n; ++i) col.push_back(cos_mat[static_cast<size_t>(i)][static_cast<size_t>(j)]);
    terms.push_back(info_nce(logits_vector(col, tau), j));
  }
  return mean(concat_last(terms));
}

template <class T>
TensorT<T> dpc_loss(EncoderBundleT<T>& bundle, const TensorT<T>& states,
                    int context_len, int horizon, T tau) {
  check_dim(states.ndim() == 2, "dpc_loss: states must be [S, state_dim]");
  check_value(tau > T(0), "similarity temperature must be positive");
  const int s_count = states.dim(0);
  const int dim = states.dim(1);
  check_contract(context_len >= 1, "dpc_loss: context length must be >= 1");
  check_contract(horizon >= 1, "dpc_loss: horizon must be >= 1");
  check_contract(context_len + horizon <= s_count,
                 "dpc_loss: horizon exceeds sequence end");

  // Encode the context prefix.
  auto carry = bundle.f.initial_carry(1);
  TensorT<T> z;
  for (int t = 0; t < context_len; ++t) {
    auto s_t = reshape(row(states, t), {1, dim});
    auto [z_t, next] = bundle.f.step(s_t, carry);
    z = z_t;
    carry = next;
  }
  auto preds = bundle.rollout_predictions(carry, z, horizon);

  std::vector<TensorT<T>> state_rows;
  for (int t = 0; t < s_count; ++t) state_rows.push_back(row(states, t));

  std::vector<TensorT<T>> terms;
  for (int k = 0; k < horizon; ++k) {
    auto pred = reshape(preds[static_cast<size_t>(k)], {dim});
    const int target = context_len + k;
    std::vector<TensorT<T>> cosines;
    for (int t = 0; t < s_count; ++t)
      cosines.push_back(cosine(pred, state_rows[static_cast<size_t>(t)]));
    terms.push_back(info_nce(logits_vector(cosines, tau), target));
  }
  return mean(concat_last(terms));
}

template <class T>
TensorT<T> seq_contrast_loss(const TensorT<T>& z, const TensorT<T>& z_p,
                             const std::vector<TensorT<T>>& z_negatives, T tau) {
  check_contract(!z_negatives.empty(),
                 "seq_contrast_loss needs at least one negative");
  check_value(tau > T(0), "similarity temperature must be positive");
  std::vector<TensorT<T>> cosines;
  cosines.push_back(cosine(z, z_p));
  for (const auto& zn : z_negatives) {
    check_dim(zn.shape() == z.shape(), "seq_contrast_loss: dimension mismatch");
    cosines.push_back(cosine(z, zn));
  }
  return info_nce(logits_vector(cosines, tau), 0);
}

template <class T>
LossReportT<T> total_loss(EncoderBundleT<T>& bundle,
                          const std::vector<const Trajectory*>& expert,
                          const std::vector<const Trajectory*>& nonexpert,
                          const LossParamsT<T>& params, Rng& rng) {
  check_contract(expert.size() >= 2 && nonexpert.size() >= 2,
                 "total_loss needs at least 2 sequences per distribution");
  const int n_e = static_cast<int>(expert.size());
  const int batch = n_e + static_cast<int>(nonexpert.size());
  std::vector<const Trajectory*> seqs(expert);
  seqs.insert(seqs.end(), nonexpert.begin(), nonexpert.end());

  const int s_count = static_cast<int>(seqs.front()->frames.size());
  for (const auto* traj : seqs)
    check_contract(static_cast<int>(traj->frames.size()) == s_count,
                   "total_loss: sequences must share length");
  check_contract(s_count >= 3, "total_loss: sequences too short");

  // Shared prediction geometry for this batch, drawn first so tests can
  // reproduce the draw.
  const int horizon = std::min(params.dpc_horizon, s_count - 2);
  check_contract(horizon >= 1, "total_loss: sequences too short for prediction");
  const int t_max = s_count - horizon;
  const int t_ctx = t_max <= 1 ? 1 : rng.randint(1, t_max);

  // Lab views for every frame, batched time-major: index t*batch + b.
  std::vector<std::vector<LabViews>> views(static_cast<size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    views[static_cast<size_t>(b)].reserve(static_cast<size_t>(s_count));
    for (const auto& frame : seqs[static_cast<size_t>(b)]->frames)
      views[static_cast<size_t>(b)].push_back(rgb_to_lab(frame));
  }
  std::vector<const LabViews*> flat;
  flat.reserve(static_cast<size_t>(batch) * s_count);
  for (int t = 0; t < s_count; ++t)
    for (int b = 0; b < batch; ++b)
      flat.push_back(&views[static_cast<size_t>(b)][static_cast<size_t>(t)]);
  auto [l_all, ab_all] = lab_batch_tensors<T>(flat);
  auto s_all = bundle.encode_views(l_all, ab_all, /*training=*/true);

  // Sequence encodings via one batched recurrent pass; the carry and output
  // after the context prefix are reused by the prediction term.
  auto carry = bundle.f.initial_carry(batch);
  typename SeqEncoderT<T>::Carry ctx_carry;
  TensorT<T> z_ctx, z_final;
  for (int t = 0; t < s_count; ++t) {
    auto x_t = rows(s_all, t * batch, batch);
    auto [z_t, next] = bundle.f.step(x_t, carry);
    z_final = z_t;
    carry = next;
    if (t + 1 == t_ctx) {
      z_ctx = z_t;
      ctx_carry = next;
    }
  }
  std::vector<TensorT<T>> z_rows;
  for (int b = 0; b < batch; ++b) z_rows.push_back(row(z_final, b));

  auto same_dist = [&](int b) {
    return b < n_e ? std::pair<int, int>{0, n_e}
                   : std::pair<int, int>{n_e, batch};
  };
  auto other_dist = [&](int b) {
    return b < n_e ? std::pair<int, int>{n_e, batch}
                   : std::pair<int, int>{0, n_e};
  };

  // Sequence-level contrast: positive from the same distribution,
  // negatives sampled from the other distribution.
  std::vector<TensorT<T>> o_terms;
  for (int b = 0; b < batch; ++b) {
    auto [s_lo, s_hi] = same_dist(b);
    int pos = b;
    while (pos == b) pos = rng.randint(s_lo, s_hi - 1);
    auto [o_lo, o_hi] = other_dist(b);
    std::vector<int> pool;
    for (int j = o_lo; j < o_hi; ++j) pool.push_back(j);
    std::shuffle(pool.begin(), pool.end(), rng.engine());
    const int k = std::min<int>(params.seq_negatives, static_cast<int>(pool.size()));
    std::vector<TensorT<T>> negs;
    for (int j = 0; j < k; ++j) negs.push_back(z_rows[static_cast<size_t>(pool[static_cast<size_t>(j)])]);
    o_terms.push_back(seq_contrast_loss(z_rows[static_cast<size_t>(b)],
                                        z_rows[static_cast<size_t>(pos)], negs,
                                        params.tau));
  }
  auto l_o = mean(concat_last(o_terms));

  // Predictive-coding term, batched across sequences at the shared context
  // length (equivalent to averaging dpc_loss per sequence at the same t).
  auto preds = bundle.rollout_predictions(ctx_carry, z_ctx, horizon);
  std::vector<TensorT<T>> state_rows(static_cast<size_t>(s_count) *
                                     static_cast<size_t>(batch));
  for (int t = 0; t < s_count; ++t)
    for (int b = 0; b < batch; ++b)
      state_rows[static_cast<size_t>(t) * batch + b] = row(s_all, t * batch + b);
  std::vector<TensorT<T>> z_terms;
  for (int b = 0; b < batch; ++b) {
    for (int k = 0; k < horizon; ++k) {
      auto pred = row(preds[static_cast<size_t>(k)], b);
      std::vector<TensorT<T>> cosines;
      cosines.reserve(static_cast<size_t>(s_count));
      for (int t = 0; t < s_count; ++t)
        cosines.push_back(
            cosine(pred, state_rows[static_cast<size_t>(t) * batch + b]));
      z_terms.push_back(info_nce(logits_vector(cosines, params.tau), t_ctx + k));
    }
  }
  auto l_z = mean(concat_last(z_terms));

  // Frame-level terms on one sampled triplet per sequence.
  const int min_gap = std::max(2, s_count / 4);
  std::vector<TensorT<T>> trip_terms;
  std::vector<TensorT<T>> anchor_rows;
  std::vector<const LabViews*> anchor_views;
  for (int b = 0; b < batch; ++b) {
    const int a_idx = rng.randint(0, s_count - 1);
    int p_idx = a_idx;
    while (p_idx == a_idx || p_idx < 0 || p_idx >= s_count) {
      const int off = rng.randint(-2, 2);
      p_idx = a_idx + off;
    }
    std::vector<int> far;
    for (int t = 0; t < s_count; ++t)
      if (std::abs(t - a_idx) >= min_gap) far.push_back(t);
    const int n_idx = far.empty() ? (a_idx < s_count / 2 ? s_count - 1 : 0)
                                  : far[static_cast<size_t>(rng.randint(
                                        0, static_cast<int>(far.size()) - 1))];
    auto s_a = row(s_all, a_idx * batch + b);
    auto s_p = row(s_all, p_idx * batch + b);
    auto s_n = row(s_all, n_idx * batch + b);
    trip_terms.push_back(triplet_loss(s_a, s_p, s_n, params.rho));
    anchor_rows.push_back(s_a);
    anchor_views.push_back(&views[static_cast<size_t>(b)][static_cast<size_t>(a_idx)]);
  }
  auto l_triplet = mean(concat_last(trip_terms));

  auto anchors = stack_rows(anchor_rows);
  auto recon = bundle.decode_state(anchors, /*training=*/true);
  auto target = lab_target_tensor<T>(anchor_views);
  auto l_ae = ae_loss(target, recon);

  const int half = bundle.scale.view_out;
  auto l_s = cmc_loss(slice_last(anchors, 0, half), slice_last(anchors, half, half),
                      params.tau);

  LossReportT<T> report;
  report.total = add(add(add(l_triplet, l_ae), add(l_s, l_z)), l_o);
  report.l_triplet = static_cast<double>(l_triplet.item());
  report.l_ae = static_cast<double>(l_ae.item());
  report.l_s = static_cast<double>(l_s.item());
  report.l_z = static_cast<double>(l_z.item());
  report.l_o = static_cast<double>(l_o.item());
  report.l_total = static_cast<double>(report.total.item());
  return report;
}

#define IFO_INSTANTIATE_LOSSES(T)                                            \
  template TensorT<T> similarity_h<T>(const TensorT<T>&, const TensorT<T>&, T); \
  template TensorT<T> triplet_loss<T>(const TensorT<T>&, const TensorT<T>&,  \
                                      const TensorT<T>&, T);                 \
  template TensorT<T> ae_loss<T>(const TensorT<T>&, const TensorT<T>&);      \
  template TensorT<T> cmc_loss<T>(const TensorT<T>&, const TensorT<T>&, T);  \
  template TensorT<T> dpc_loss<T>(EncoderBundleT<T>&, const TensorT<T>&, int, \
                                  int, T);                                   \
  template TensorT<T> seq_contrast_loss<T>(const TensorT<T>&, const TensorT<T>&, \
                                           const std::vector<TensorT<T>>&, T); \
  template LossReportT<T> total_loss<T>(EncoderBundleT<T>&,                  \
                                        const std::vector<const Trajectory*>&, \
                                        const std::vector<const Trajectory*>&, \
                                        const LossParamsT<T>&, Rng&);

IFO_INSTANTIATE_LOSSES(float)
IFO_INSTANTIATE_LOSSES(double)

#undef IFO_INSTANTIATE_LOSSES

}  // namespace ifo
