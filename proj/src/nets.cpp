#include "ifo/nets.hpp"

#include <cmath>

namespace ifo {
namespace {

int conv_out(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }
int tconv_out(int in, int k, int s, int op) { return (in - 1) * s + k + op; }

}  // namespace

NetScale NetScale::desk() {
  NetScale sc;
  sc.frame_size = 32;
  sc.trunk = {{16, 5, 2, 0}, {32, 5, 2, 0}, {64, 5, 2, 0}};
  sc.head_channels = {128};
  sc.view_out = 64;
  sc.dec_head = {128, 128};
  sc.dec_tconvs = {{64, 5, 2, 0}, {32, 5, 2, 1}, {3, 5, 2, 1}};
  sc.embed_dim = 128;
  sc.lstm_hidden = 128;
  sc.predictor_hidden = 128;
  return sc;
}

NetScale NetScale::paper() {
  NetScale sc;
  sc.frame_size = 64;
  sc.trunk = {{64, 5, 2, 0}, {128, 5, 2, 0}, {256, 5, 2, 0}, {512, 5, 2, 0}};
  sc.head_channels = {512};
  sc.view_out = 64;
  sc.dec_head = {512, 512};
  sc.dec_tconvs = {{256, 5, 2, 0}, {128, 5, 2, 0}, {64, 5, 2, 1}, {3, 5, 2, 1}};
  sc.embed_dim = 128;
  sc.lstm_hidden = 128;
  sc.predictor_hidden = 128;
  return sc;
}

NetScale NetScale::micro() {
  NetScale sc;
  sc.frame_size = 4;
  sc.trunk = {{4, 3, 1, 0}, {6, 2, 1, 0}};
  sc.head_channels = {8};
  sc.view_out = 4;
  sc.dec_head = {8, 8};
  sc.dec_tconvs = {{4, 2, 1, 0}, {3, 3, 1, 0}};
  sc.embed_dim = 8;
  sc.lstm_hidden = 8;
  sc.predictor_hidden = 8;
  return sc;
}

template <class T>
void ViewEncoderT<T>::init(int in_channels, const NetScale& scale, Rng& rng) {
  slope = static_cast<T>(scale.leaky_slope);
  int ch = in_channels;
  int spatial = scale.frame_size;
  convs.clear();
  bns.clear();
  for (const auto& spec : scale.trunk) {
    Conv2dLayerT<T> conv;
    conv.init(ch, spec.channels, spec.kernel, spec.stride, spec.padding, rng,
              /*bias=*/false);
    convs.push_back(conv);
    BatchNorm2dLayerT<T> bn;
    bn.init(spec.channels);
    bns.push_back(bn);
    ch = spec.channels;
    spatial = conv_out(spatial, spec.kernel, spec.stride, spec.padding);
  }
  check_dim(spatial == 1, "encoder trunk must reduce frames to 1x1, got " +
                              std::to_string(spatial));
  for (int head_ch : scale.head_channels) {
    Conv2dLayerT<T> conv;
    conv.init(ch, head_ch, 1, 1, 0, rng, /*bias=*/false);
    convs.push_back(conv);
    BatchNorm2dLayerT<T> bn;
    bn.init(head_ch);
    bns.push_back(bn);
    ch = head_ch;
  }
  out_conv.init(ch, scale.view_out, 1, 1, 0, rng, /*bias=*/true);
}

template <class T>
TensorT<T> ViewEncoderT<T>::forward(const TensorT<T>& x, bool training) {
  TensorT<T> h = x;
  for (size_t i = 0; i < convs.size(); ++i) {
    h = convs[i].forward(h);
    h = bns[i].forward(h, training);
    h = leaky_relu(h, slope);
  }
  h = out_conv.forward(h);
  check_dim(h.dim(2) == 1 && h.dim(3) == 1, "encoder output spatial must be 1x1");
  return reshape(h, {h.dim(0), h.dim(1)});
}

template <class T>
void ViewEncoderT<T>::collect(const std::string& prefix, ParamRegistryT<T>& reg) {
  for (size_t i = 0; i < convs.size(); ++i) {
    convs[i].collect(prefix + ".conv" + std::to_string(i), reg);
    bns[i].collect(prefix + ".bn" + std::to_string(i), reg);
  }
  out_conv.collect(prefix + ".out", reg);
}

template <class T>
void DecoderT<T>::init(const NetScale& scale, Rng& rng) {
  slope = static_cast<T>(scale.leaky_slope);
  check_value(scale.dec_head.size() == 2, "decoder expects two 1x1 head convs");
  head0.init(scale.state_dim(), scale.dec_head[0], 1, 1, 0, rng, /*bias=*/true);
  head1.init(scale.dec_head[0], scale.dec_head[1], 1, 1, 0, rng, /*bias=*/false);
  head1_bn.init(scale.dec_head[1]);

  int ch = scale.dec_head[1];
  int spatial = 1;
  tconvs.clear();
  tconv_bns.clear();
  for (size_t i = 0; i < scale.dec_tconvs.size(); ++i) {
    const auto& spec = scale.dec_tconvs[i];
    const bool last = i + 1 == scale.dec_tconvs.size();
    ConvTranspose2dLayerT<T> tc;
    tc.init(ch, spec.channels, spec.kernel, spec.stride, spec.output_padding,
            rng, /*bias=*/last);
    tconvs.push_back(tc);
    if (!last) {
      BatchNorm2dLayerT<T> bn;
      bn.init(spec.channels);
      tconv_bns.push_back(bn);
    }
    ch = spec.channels;
    spatial = tconv_out(spatial, spec.kernel, spec.stride, spec.output_padding);
  }
  check_dim(ch == 3, "decoder must end with 3 output channels");
  check_dim(spatial == scale.frame_size,
            "decoder output spatial " + std::to_string(spatial) +
                " does not match frame size " + std::to_string(scale.frame_size));
}

template <class T>
TensorT<T> DecoderT<T>::forward(const TensorT<T>& s, bool training) {
  check_dim(s.ndim() == 2, "decode_state expects [N, state_dim]");
  TensorT<T> h = reshape(s, {s.dim(0), s.dim(1), 1, 1});
  h = leaky_relu(head0.forward(h), slope);
  h = leaky_relu(head1_bn.forward(head1.forward(h), training), slope);
  for (size_t i = 0; i < tconvs.size(); ++i) {
    h = tconvs[i].forward(h);
    if (i + 1 < tconvs.size())
      h = leaky_relu(tconv_bns[i].forward(h, training), slope);
  }
  return h;
}

template <class T>
void DecoderT<T>::collect(const std::string& prefix, ParamRegistryT<T>& reg) {
  head0.collect(prefix + ".head0", reg);
  head1.collect(prefix + ".head1", reg);
  head1_bn.collect(prefix + ".head1_bn", reg);
  for (size_t i = 0; i < tconvs.size(); ++i) {
    tconvs[i].collect(prefix + ".tconv" + std::to_string(i), reg);
    if (i < tconv_bns.size())
      tconv_bns[i].collect(prefix + ".tconv_bn" + std::to_string(i), reg);
  }
}

template <class T>
void SeqEncoderT<T>::init(int input_dim_, int hidden_, int out_dim_, Rng& rng) {
  input_dim = input_dim_;
  hidden = hidden_;
  out_dim = out_dim_;
  l0.init(input_dim, hidden, rng);
  l1.init(hidden, hidden, rng);
  head.init(hidden, out_dim, rng);
}

template <class T>
typename SeqEncoderT<T>::Carry SeqEncoderT<T>::initial_carry(int batch) const {
  Carry c;
  c.h0 = TensorT<T>::zeros({batch, hidden});
  c.c0 = TensorT<T>::zeros({batch, hidden});
  c.h1 = TensorT<T>::zeros({batch, hidden});
  c.c1 = TensorT<T>::zeros({batch, hidden});
  c.steps = 0;
  return c;
}

template <class T>
std::pair<TensorT<T>, typename SeqEncoderT<T>::Carry> SeqEncoderT<T>::step(
    const TensorT<T>& s, const Carry& carry) const {
  check_dim(s.ndim() == 2 && s.dim(1) == input_dim,
            "sequence encoder input must be [B," + std::to_string(input_dim) + "]");
  Carry next;
  auto [h0, c0] = l0.step(s, carry.h0, carry.c0);
  auto [h1, c1] = l1.step(h0, carry.h1, carry.c1);
  next.h0 = h0;
  next.c0 = c0;
  next.h1 = h1;
  next.c1 = c1;
  next.steps = carry.steps + 1;
  return {head.forward(h1), next};
}

template <class T>
void SeqEncoderT<T>::collect(const std::string& prefix, ParamRegistryT<T>& reg) {
  l0.collect(prefix + ".l0", reg);
  l1.collect(prefix + ".l1", reg);
  head.collect(prefix + ".head", reg);
}

template <class T>
void PredictorT<T>::init(int embed_dim, int hidden, int state_dim, Rng& rng) {
  fc0.init(embed_dim, hidden, rng);
  fc1.init(hidden, state_dim, rng);
}

template <class T>
TensorT<T> PredictorT<T>::forward(const TensorT<T>& z) const {
  return fc1.forward(leaky_relu(fc0.forward(z), slope));
}

template <class T>
void PredictorT<T>::collect(const std::string& prefix, ParamRegistryT<T>& reg) {
  fc0.collect(prefix + ".fc0", reg);
  fc1.collect(prefix + ".fc1", reg);
}

template <class T>
EncoderBundleT<T> EncoderBundleT<T>::init(const NetScale& scale, uint64_t seed) {
  EncoderBundleT<T> b;
  b.scale = scale;
  Rng rng = Rng::derive(seed, 0xb0d1);
  b.g1.init(1, scale, rng);
  b.g2.init(2, scale, rng);
  b.dec.init(scale, rng);
  b.f.init(scale.state_dim(), scale.lstm_hidden, scale.embed_dim, rng);
  b.d.init(scale.embed_dim, scale.predictor_hidden, scale.state_dim(), rng);
  b.d.slope = static_cast<T>(scale.leaky_slope);
  return b;
}

template <class T>
TensorT<T> EncoderBundleT<T>::encode_views(const TensorT<T>& l,
                                           const TensorT<T>& ab, bool training) {
  check_dim(l.ndim() == 4 && l.dim(1) == 1, "encode_views: l must be [N,1,H,W]");
  check_dim(ab.ndim() == 4 && ab.dim(1) == 2, "encode_views: ab must be [N,2,H,W]");
  check_dim(l.dim(2) == scale.frame_size && l.dim(3) == scale.frame_size,
            "encode_views: frame size mismatch, expected " +
                std::to_string(scale.frame_size));
  auto s1 = g1.forward(l, training);
  auto s2 = g2.forward(ab, training);
  return concat_last(std::vector<TensorT<T>>{s1, s2});
}

template <class T>
TensorT<T> EncoderBundleT<T>::encode_frame(const Frame& frame) {
  check_dim(frame.height == scale.frame_size && frame.width == scale.frame_size,
            "encode_frame: frame is " + std::to_string(frame.height) + "x" +
                std::to_string(frame.width) + ", expected " +
                std::to_string(scale.frame_size));
  const LabViews views = rgb_to_lab(frame);
  std::vector<const LabViews*> batch{&views};
  auto [l, ab] = lab_batch_tensors<T>(batch);
  auto s = encode_views(l, ab, /*training=*/false);
  return reshape(s, {s.dim(1)});
}

template <class T>
TensorT<T> EncoderBundleT<T>::decode_state(const TensorT<T>& s, bool training) {
  check_dim(s.ndim() == 2 && s.dim(1) == scale.state_dim(),
            "decode_state: expected [N," + std::to_string(scale.state_dim()) + "]");
  return dec.forward(s, training);
}

template <class T>
std::pair<TensorT<T>, typename SeqEncoderT<T>::Carry>
EncoderBundleT<T>::encode_sequence(const TensorT<T>& states) {
  check_dim(states.ndim() == 2 && states.dim(1) == scale.state_dim(),
            "encode_sequence: expected [S, state_dim]");
  check_contract(states.dim(0) >= 1, "encode_sequence: needs at least one state");
  auto carry = f.initial_carry(1);
  TensorT<T> z;
  for (int t = 0; t < states.dim(0); ++t) {
    auto s_t = reshape(row(states, t), {1, scale.state_dim()});
    auto [z_t, next] = f.step(s_t, carry);
    z = z_t;
    carry = next;
  }
  return {reshape(z, {scale.embed_dim}), carry};
}

template <class T>
std::vector<TensorT<T>> EncoderBundleT<T>::rollout_predictions(
    const typename SeqEncoderT<T>::Carry& carry_after_t, const TensorT<T>& z_t,
    int horizon) const {
  check_contract(horizon >= 1, "rollout horizon must be >= 1");
  std::vector<TensorT<T>> preds;
  preds.reserve(static_cast<size_t>(horizon));
  auto carry = carry_after_t;
  auto z = z_t;
  for (int k = 1; k <= horizon; ++k) {
    auto s_hat = d.forward(z);
    preds.push_back(s_hat);
    if (k < horizon) {
      auto [z_next, carry_next] = f.step(s_hat, carry);
      z = z_next;
      carry = carry_next;
    }
  }
  return preds;
}

template <class T>
ParamRegistryT<T> EncoderBundleT<T>::registry() {
  ParamRegistryT<T> reg;
  g1.collect("g1", reg);
  g2.collect("g2", reg);
  dec.collect("q", reg);
  f.collect("f", reg);
  d.collect("d", reg);
  return reg;
}

template <class T>
std::vector<TensorT<T>> EncoderBundleT<T>::trainable_params() {
  auto reg = registry();
  std::vector<TensorT<T>> out;
  out.reserve(reg.params.size());
  for (auto& [name, t] : reg.params) out.push_back(t);
  return out;
}

template <class T>
std::pair<TensorT<T>, TensorT<T>> lab_batch_tensors(
    const std::vector<const LabViews*>& views) {
  check_value(!views.empty(), "lab_batch_tensors: empty batch");
  const int h = views.front()->height, w = views.front()->width;
  const size_t plane = static_cast<size_t>(h) * w;
  auto l = TensorT<T>::zeros({static_cast<int>(views.size()), 1, h, w});
  auto ab = TensorT<T>::zeros({static_cast<int>(views.size()), 2, h, w});
  for (size_t i = 0; i < views.size(); ++i) {
    check_dim(views[i]->height == h && views[i]->width == w,
              "lab_batch_tensors: mixed frame sizes");
    for (size_t p = 0; p < plane; ++p)
      l.data()[i * plane + p] = static_cast<T>(views[i]->l_view[p]);
    for (size_t p = 0; p < 2 * plane; ++p)
      ab.data()[i * 2 * plane + p] = static_cast<T>(views[i]->ab_view[p]);
  }
  return {l, ab};
}

template <class T>
TensorT<T> lab_target_tensor(const std::vector<const LabViews*>& views) {
  check_value(!views.empty(), "lab_target_tensor: empty batch");
  const int h = views.front()->height, w = views.front()->width;
  const size_t plane = static_cast<size_t>(h) * w;
  auto out = TensorT<T>::zeros({static_cast<int>(views.size()), 3, h, w});
  for (size_t i = 0; i < views.size(); ++i) {
    for (size_t p = 0; p < plane; ++p)
      out.data()[i * 3 * plane + p] = static_cast<T>(views[i]->l_view[p]);
    for (size_t p = 0; p < 2 * plane; ++p)
      out.data()[i * 3 * plane + plane + p] = static_cast<T>(views[i]->ab_view[p]);
  }
  return out;
}

AgentNets AgentNets::init(int frame_size, uint64_t seed) {
  AgentNets n;
  n.frame_size = frame_size;
  Rng rng = Rng::derive(seed, 0xa6e7);
  n.e_conv0.init(3, 8, 5, 4, 0, rng, /*bias=*/true);
  int spatial = conv_out(frame_size, 5, 4, 0);
  n.e_conv1.init(8, 16, 3, 2, 0, rng, /*bias=*/true);
  spatial = conv_out(spatial, 3, 2, 0);
  check_dim(spatial >= 1, "agent encoder needs larger frames");
  const int flat = 16 * spatial * spatial;
  n.e_fc.init(flat, n.enc_dim, rng);
  n.pi_fc0.init(n.enc_dim, n.hidden, rng);
  n.pi_fc1.init(n.hidden, n.hidden, rng);
  n.pi_out.init(n.hidden, n.action_dim, rng);
  n.q_fc0.init(n.enc_dim + n.action_dim, n.hidden, rng);
  n.q_fc1.init(n.hidden, n.hidden, rng);
  n.q_out.init(n.hidden, 1, rng);
  // Targets get their own storage (tensor handles share storage on copy)
  // and start as exact copies of the online parameters.
  auto detached_conv = [](const Conv2dLayerT<float>& src) {
    Conv2dLayerT<float> dst = src;
    dst.w = src.w.clone_detached();
    if (src.b.defined()) dst.b = src.b.clone_detached();
    return dst;
  };
  auto detached_fc = [](const LinearLayerT<float>& src) {
    LinearLayerT<float> dst = src;
    dst.w = src.w.clone_detached();
    if (src.b.defined()) dst.b = src.b.clone_detached();
    return dst;
  };
  n.te_conv0 = detached_conv(n.e_conv0);
  n.te_conv1 = detached_conv(n.e_conv1);
  n.te_fc = detached_fc(n.e_fc);
  n.tq_fc0 = detached_fc(n.q_fc0);
  n.tq_fc1 = detached_fc(n.q_fc1);
  n.tq_out = detached_fc(n.q_out);
  return n;
}

namespace {
Tensor agent_encode_impl(const Conv2dLayerT<float>& c0,
                         const Conv2dLayerT<float>& c1,
                         const LinearLayerT<float>& fc, const Tensor& o) {
  auto h = leaky_relu(c0.forward(o), 0.0f);
  h = leaky_relu(c1.forward(h), 0.0f);
  h = reshape(h, {h.dim(0), h.dim(1) * h.dim(2) * h.dim(3)});
  return tanh(fc.forward(h));
}
Tensor critic_impl(const LinearLayerT<float>& fc0, const LinearLayerT<float>& fc1,
                   const LinearLayerT<float>& out, const Tensor& enc,
                   const Tensor& action) {
  auto h = concat_last(std::vector<Tensor>{enc, action});
  h = leaky_relu(fc0.forward(h), 0.0f);
  h = leaky_relu(fc1.forward(h), 0.0f);
  return out.forward(h);
}
void blend(Tensor& target, const Tensor& online, float rate) {
  auto& t = target.data();
  const auto& o = online.data();
  for (size_t i = 0; i < t.size(); ++i) t[i] = rate * t[i] + (1.f - rate) * o[i];
}
}  // namespace

Tensor AgentNets::encode(const Tensor& o) const {
  return agent_encode_impl(e_conv0, e_conv1, e_fc, o);
}
Tensor AgentNets::target_encode(const Tensor& o) const {
  return agent_encode_impl(te_conv0, te_conv1, te_fc, o);
}

Tensor AgentNets::policy(const Tensor& enc) const {
  auto h = leaky_relu(pi_fc0.forward(enc), 0.0f);
  h = leaky_relu(pi_fc1.forward(h), 0.0f);
  return tanh(pi_out.forward(h));
}

Tensor AgentNets::critic(const Tensor& enc, const Tensor& action) const {
  return critic_impl(q_fc0, q_fc1, q_out, enc, action);
}
Tensor AgentNets::target_critic(const Tensor& enc, const Tensor& action) const {
  return critic_impl(tq_fc0, tq_fc1, tq_out, enc, action);
}

void AgentNets::polyak_update(float rate) {
  blend(te_conv0.w, e_conv0.w, rate);
  blend(te_conv0.b, e_conv0.b, rate);
  blend(te_conv1.w, e_conv1.w, rate);
  blend(te_conv1.b, e_conv1.b, rate);
  blend(te_fc.w, e_fc.w, rate);
  blend(te_fc.b, e_fc.b, rate);
  blend(tq_fc0.w, q_fc0.w, rate);
  blend(tq_fc0.b, q_fc0.b, rate);
  blend(tq_fc1.w, q_fc1.w, rate);
  blend(tq_fc1.b, q_fc1.b, rate);
  blend(tq_out.w, q_out.w, rate);
  blend(tq_out.b, q_out.b, rate);
}

void AgentNets::copy_online_to_target() { polyak_update(0.f); }

std::vector<Tensor> AgentNets::critic_params() {
  return {e_conv0.w, e_conv0.b, e_conv1.w, e_conv1.b, e_fc.w, e_fc.b,
          q_fc0.w,   q_fc0.b,   q_fc1.w,   q_fc1.b,   q_out.w, q_out.b};
}
std::vector<Tensor> AgentNets::policy_params() {
  return {pi_fc0.w, pi_fc0.b, pi_fc1.w, pi_fc1.b, pi_out.w, pi_out.b};
}

ParamRegistry AgentNets::registry() {
  ParamRegistry reg;
  e_conv0.collect("policy.e.conv0", reg);
  e_conv1.collect("policy.e.conv1", reg);
  e_fc.collect("policy.e.fc", reg);
  pi_fc0.collect("policy.head.fc0", reg);
  pi_fc1.collect("policy.head.fc1", reg);
  pi_out.collect("policy.head.out", reg);
  q_fc0.collect("critic.fc0", reg);
  q_fc1.collect("critic.fc1", reg);
  q_out.collect("critic.out", reg);
  te_conv0.collect("critic_target.e.conv0", reg);
  te_conv1.collect("critic_target.e.conv1", reg);
  te_fc.collect("critic_target.e.fc", reg);
  tq_fc0.collect("critic_target.fc0", reg);
  tq_fc1.collect("critic_target.fc1", reg);
  tq_out.collect("critic_target.out", reg);
  return reg;
}

Tensor AgentNets::frame_to_input(const Frame& frame) const {
  check_dim(frame.height == frame_size && frame.width == frame_size,
            "agent frame size mismatch");
  auto t = Tensor::zeros({1, 3, frame_size, frame_size});
  for (size_t i = 0; i < frame.rgb.size(); ++i)
    t.data()[i] = static_cast<float>(frame.rgb[i]) / 127.5f - 1.f;
  return t;
}

#define IFO_INSTANTIATE_NETS(T)                                              \
  template struct ViewEncoderT<T>;                                           \
  template struct DecoderT<T>;                                               \
  template struct SeqEncoderT<T>;                                            \
  template struct PredictorT<T>;                                             \
  template struct EncoderBundleT<T>;                                         \
  template std::pair<TensorT<T>, TensorT<T>> lab_batch_tensors<T>(           \
      const std::vector<const LabViews*>&);                                  \
  template TensorT<T> lab_target_tensor<T>(const std::vector<const LabViews*>&);

IFO_INSTANTIATE_NETS(float)
IFO_INSTANTIATE_NETS(double)

#undef IFO_INSTANTIATE_NETS

}  // namespace ifo
