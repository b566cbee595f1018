#ifndef IFO_NETS_HPP_
#define IFO_NETS_HPP_

#include <string>
#include <utility>
#include <vector>

#include "ifo/nn.hpp"
#include "ifo/vision.hpp"

namespace ifo {

// Static architecture description for the encoding networks. The trunk and
// decoder stacks must map frame_size down to 1x1 and back; init() verifies
// the composed shape arithmetic.
struct NetScale {
  struct ConvSpec {
    int channels, kernel, stride, padding;
  };
  struct TConvSpec {
    int channels, kernel, stride, output_padding;
  };

  int frame_size = 32;
  std::vector<ConvSpec> trunk;    // strided convs, each followed by BN + LReLU
  std::vector<int> head_channels; // 1x1 convs, each followed by BN + LReLU
  int view_out = 64;              // channels of the final 1x1 conv, per view
  std::vector<int> dec_head;      // decoder 1x1 convs (first without BN)
  std::vector<TConvSpec> dec_tconvs;  // all but last followed by BN + LReLU
  int embed_dim = 128;
  int lstm_hidden = 128;
  int predictor_hidden = 128;
  float leaky_slope = 0.2f;

  int state_dim() const { return 2 * view_out; }

  static NetScale desk();
  static NetScale paper();
  // Tiny 4x4 configuration used by gradient tests.
  static NetScale micro();
};

// CNN over one color view; output spatial size must reduce to 1x1 so the
// result is a flat per-frame encoding.
template <class T>
struct ViewEncoderT {
  std::vector<Conv2dLayerT<T>> convs;
  std::vector<BatchNorm2dLayerT<T>> bns;
  Conv2dLayerT<T> out_conv;
  T slope = T(0.2);

  void init(int in_channels, const NetScale& scale, Rng& rng);
  // x[N,in,H,W] -> [N, view_out]
  TensorT<T> forward(const TensorT<T>& x, bool training);
  void collect(const std::string& prefix, ParamRegistryT<T>& reg);
};

template <class T>
struct DecoderT {
  Conv2dLayerT<T> head0;  // 1x1, LReLU only
  Conv2dLayerT<T> head1;  // 1x1, BN + LReLU
  BatchNorm2dLayerT<T> head1_bn;
  std::vector<ConvTranspose2dLayerT<T>> tconvs;
  std::vector<BatchNorm2dLayerT<T>> tconv_bns;  // for all but the last tconv
  T slope = T(0.2);

  void init(const NetScale& scale, Rng& rng);
  // s[N, state_dim] -> [N,3,H,W]
  TensorT<T> forward(const TensorT<T>& s, bool training);
  void collect(const std::string& prefix, ParamRegistryT<T>& reg);
};

// Two stacked LSTM layers plus a linear head producing the sequence
// encoding z. The carry allows incremental extension of a prefix.
template <class T>
struct SeqEncoderT {
  LstmLayerT<T> l0, l1;
  LinearLayerT<T> head;
  int input_dim = 0, hidden = 0, out_dim = 0;

  struct Carry {
    TensorT<T> h0, c0, h1, c1;
    int steps = 0;
  };

  void init(int input_dim_, int hidden_, int out_dim_, Rng& rng);
  Carry initial_carry(int batch) const;
  // s[B,input_dim] -> (z[B,out_dim], extended carry)
  std::pair<TensorT<T>, Carry> step(const TensorT<T>& s, const Carry& carry) const;
  void collect(const std::string& prefix, ParamRegistryT<T>& reg);
};

template <class T>
struct PredictorT {
  LinearLayerT<T> fc0, fc1;
  T slope = T(0.2);

  void init(int embed_dim, int hidden, int state_dim, Rng& rng);
  // z[B,embed] -> s_hat[B,state_dim]
  TensorT<T> forward(const TensorT<T>& z) const;
  void collect(const std::string& prefix, ParamRegistryT<T>& reg);
};

// Parameters of the four learned encoding functions: the two-view image
// encoder, the image decoder, the sequence encoder, and the next-state
// predictor.
template <class T>
struct EncoderBundleT {
  NetScale scale;
  ViewEncoderT<T> g1;  // L view
  ViewEncoderT<T> g2;  // ab view
  DecoderT<T> dec;
  SeqEncoderT<T> f;
  PredictorT<T> d;

  static EncoderBundleT init(const NetScale& scale, uint64_t seed);

  // l[N,1,H,W], ab[N,2,H,W] -> s[N, state_dim] (per-view encodings
  // concatenated).
  TensorT<T> encode_views(const TensorT<T>& l, const TensorT<T>& ab,
                          bool training);
  // Single-frame convenience; always eval mode.
  TensorT<T> encode_frame(const Frame& frame);
  // s[N,state_dim] -> reconstruction [N,3,H,W] in normalized Lab layout.
  TensorT<T> decode_state(const TensorT<T>& s, bool training);
  // states[S, state_dim] (rows are successive steps of one sequence)
  // -> (z at the final step, carry).
  std::pair<TensorT<T>, typename SeqEncoderT<T>::Carry> encode_sequence(
      const TensorT<T>& states);
  TensorT<T> predict_next(const TensorT<T>& z) const { return d.forward(z); }
  // K-step open-loop rollout: feeds each prediction back through the
  // sequence encoder carry. Returns [s_hat(t+1) ... s_hat(t+K)].
  std::vector<TensorT<T>> rollout_predictions(
      const typename SeqEncoderT<T>::Carry& carry_after_t, const TensorT<T>& z_t,
      int horizon) const;

  ParamRegistryT<T> registry();
  std::vector<TensorT<T>> trainable_params();
};

using EncoderBundle = EncoderBundleT<float>;

// Frame batches to network inputs.
template <class T>
std::pair<TensorT<T>, TensorT<T>> lab_batch_tensors(
    const std::vector<const LabViews*>& views);
// Normalized Lab target stack [N,3,H,W] for the reconstruction loss.
template <class T>
TensorT<T> lab_target_tensor(const std::vector<const LabViews*>& views);

// RL agent networks: a shared frame CNN E, a policy head with tanh output,
// a critic head over encoding-action pairs, and target copies of E plus
// the critic head for bootstrapped targets.
struct AgentNets {
  Conv2dLayerT<float> e_conv0, e_conv1;
  LinearLayerT<float> e_fc;
  LinearLayerT<float> pi_fc0, pi_fc1, pi_out;
  LinearLayerT<float> q_fc0, q_fc1, q_out;
  Conv2dLayerT<float> te_conv0, te_conv1;
  LinearLayerT<float> te_fc;
  LinearLayerT<float> tq_fc0, tq_fc1, tq_out;
  int frame_size = 32;
  int enc_dim = 64;
  int action_dim = 2;
  int hidden = 128;

  static AgentNets init(int frame_size, uint64_t seed);

  // o[N,3,H,W] normalized to [-1,1] -> encoding [N,enc_dim].
  Tensor encode(const Tensor& o) const;
  Tensor target_encode(const Tensor& o) const;
  // encoding -> action in [-1,1]^action_dim.
  Tensor policy(const Tensor& enc) const;
  // (encoding, action) -> q-value [N,1].
  Tensor critic(const Tensor& enc, const Tensor& action) const;
  Tensor target_critic(const Tensor& enc, const Tensor& action) const;

  // target <- rate * target + (1-rate) * online, for E and the critic head.
  void polyak_update(float rate);
  void copy_online_to_target();

  std::vector<Tensor> critic_params();  // shared E + critic head
  std::vector<Tensor> policy_params();  // policy head only
  ParamRegistry registry();

  Tensor frame_to_input(const Frame& frame) const;
};

}  // namespace ifo

#endif  // IFO_NETS_HPP_
