#ifndef IFO_NN_HPP_
#define IFO_NN_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ifo/ops.hpp"
#include "ifo/tensor.hpp"

namespace ifo {

// Named parameter/buffer registry. Layers append their tensors (trainable)
// and raw buffers (running statistics) so optimizers and checkpoints can
// walk a whole network generically.
template <class T>
struct ParamRegistryT {
  std::vector<std::pair<std::string, TensorT<T>>> params;
  std::vector<std::pair<std::string, std::vector<T>*>> buffers;

  void add(const std::string& name, const TensorT<T>& t) {
    params.emplace_back(name, t);
  }
  void add_buffer(const std::string& name, std::vector<T>* v) {
    buffers.emplace_back(name, v);
  }
};

template <class T>
struct LinearLayerT {
  TensorT<T> w, b;

  void init(int in_dim, int out_dim, Rng& rng, bool bias = true) {
    const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in_dim)));
    w = TensorT<T>::uniform({out_dim, in_dim}, rng, -bound, bound, true);
    if (bias) b = TensorT<T>::uniform({out_dim}, rng, -bound, bound, true);
  }
  TensorT<T> forward(const TensorT<T>& x) const { return linear(x, w, b); }
  void collect(const std::string& prefix, ParamRegistryT<T>& reg) {
    reg.add(prefix + ".w", w);
    if (b.defined()) reg.add(prefix + ".b", b);
  }
};

template <class T>
struct Conv2dLayerT {
  TensorT<T> w, b;
  int stride = 1, padding = 0;

  void init(int in_ch, int out_ch, int k, int stride_, int padding_, Rng& rng,
            bool bias) {
    stride = stride_;
    padding = padding_;
    const double fan_in = static_cast<double>(in_ch) * k * k;
    const T std_dev = static_cast<T>(std::sqrt(2.0 / fan_in));
    w = TensorT<T>::randn({out_ch, in_ch, k, k}, rng, std_dev, true);
    if (bias) b = TensorT<T>::zeros({out_ch}, true);
  }
  TensorT<T> forward(const TensorT<T>& x) const {
    auto y = conv2d(x, w, stride, padding);
    return b.defined() ? add_channel_bias(y, b) : y;
  }
  void collect(const std::string& prefix, ParamRegistryT<T>& reg) {
    reg.add(prefix + ".w", w);
    if (b.defined()) reg.add(prefix + ".b", b);
  }
};

template <class T>
struct ConvTranspose2dLayerT {
  TensorT<T> w, b;
  int stride = 1, output_padding = 0;

  void init(int in_ch, int out_ch, int k, int stride_, int output_padding_,
            Rng& rng, bool bias) {
    stride = stride_;
    output_padding = output_padding_;
    const double fan_in = static_cast<double>(in_ch) * k * k;
    const T std_dev = static_cast<T>(std::sqrt(2.0 / fan_in));
    w = TensorT<T>::randn({in_ch, out_ch, k, k}, rng, std_dev, true);
    if (bias) b = TensorT<T>::zeros({out_ch}, true);
  }
  TensorT<T> forward(const TensorT<T>& x) const {
    auto y = conv2d_transposed(x, w, stride, output_padding);
    return b.defined() ? add_channel_bias(y, b) : y;
  }
  void collect(const std::string& prefix, ParamRegistryT<T>& reg) {
    reg.add(prefix + ".w", w);
    if (b.defined()) reg.add(prefix + ".b", b);
  }
};

template <class T>
struct BatchNorm2dLayerT {
  TensorT<T> gamma, beta;
  std::vector<T> running_mean, running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  void init(int channels) {
    gamma = TensorT<T>::filled({channels}, T(1), true);
    beta = TensorT<T>::zeros({channels}, true);
    running_mean.assign(channels, T(0));
    running_var.assign(channels, T(1));
  }
  TensorT<T> forward(const TensorT<T>& x, bool training) {
    return batchnorm2d(x, gamma, beta, running_mean, running_var, training,
                       momentum, eps);
  }
  void collect(const std::string& prefix, ParamRegistryT<T>& reg) {
    reg.add(prefix + ".gamma", gamma);
    reg.add(prefix + ".beta", beta);
    reg.add_buffer(prefix + ".running_mean", &running_mean);
    reg.add_buffer(prefix + ".running_var", &running_var);
  }
};

// One LSTM layer; gate order in the stacked weight matrices is
// [input, forget, candidate, output].
template <class T>
struct LstmLayerT {
  TensorT<T> wx, wh, b;
  int input_dim = 0, hidden_dim = 0;

  void init(int input_dim_, int hidden_dim_, Rng& rng) {
    input_dim = input_dim_;
    hidden_dim = hidden_dim_;
    const T bound =
        static_cast<T>(1.0 / std::sqrt(static_cast<double>(hidden_dim)));
    wx = TensorT<T>::uniform({4 * hidden_dim, input_dim}, rng, -bound, bound, true);
    wh = TensorT<T>::uniform({4 * hidden_dim, hidden_dim}, rng, -bound, bound, true);
    b = TensorT<T>::uniform({4 * hidden_dim}, rng, -bound, bound, true);
  }

  // x[B,input_dim], h/c[B,hidden_dim] -> (h', c').
  std::pair<TensorT<T>, TensorT<T>> step(const TensorT<T>& x, const TensorT<T>& h,
                                         const TensorT<T>& c) const {
    auto gates = add(linear(x, wx, b), linear(h, wh, TensorT<T>()));
    auto i_g = sigmoid(slice_last(gates, 0, hidden_dim));
    auto f_g = sigmoid(slice_last(gates, hidden_dim, hidden_dim));
    auto g_g = tanh(slice_last(gates, 2 * hidden_dim, hidden_dim));
    auto o_g = sigmoid(slice_last(gates, 3 * hidden_dim, hidden_dim));
    auto c_next = add(mul(f_g, c), mul(i_g, g_g));
    auto h_next = mul(o_g, tanh(c_next));
    return {h_next, c_next};
  }

  void collect(const std::string& prefix, ParamRegistryT<T>& reg) {
    reg.add(prefix + ".wx", wx);
    reg.add(prefix + ".wh", wh);
    reg.add(prefix + ".b", b);
  }
};

// Adam with bias correction. Parameters without an accumulated gradient in
// the current step are treated as having zero gradient.
template <class T>
class AdamT {
 public:
  AdamT(std::vector<TensorT<T>> params, T lr, T beta1 = T(0.9),
        T beta2 = T(0.999), T eps = T(1e-8))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
        eps_(eps) {
    check_value(lr > T(0), "adam: learning rate must be positive");
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].data().size(), T(0));
      v_[i].assign(params_[i].data().size(), T(0));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(beta1_), t_);
    const double bc2 = 1.0 - std::pow(static_cast<double>(beta2_), t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].data();
      const auto& g = params_[i].grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < p.size(); ++j) {
        const T gj = g.empty() ? T(0) : g[j];
        m[j] = beta1_ * m[j] + (T(1) - beta1_) * gj;
        v[j] = beta2_ * v[j] + (T(1) - beta2_) * gj * gj;
        const T mhat = static_cast<T>(m[j] / bc1);
        const T vhat = static_cast<T>(v[j] / bc2);
        p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  int64_t step_count() const { return t_; }
  T lr() const { return lr_; }
  void set_lr(T lr) {
    check_value(lr > T(0), "adam: learning rate must be positive");
    lr_ = lr;
  }

 private:
  std::vector<TensorT<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  T lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

using ParamRegistry = ParamRegistryT<float>;
using Adam = AdamT<float>;

}  // namespace ifo

#endif  // IFO_NN_HPP_
