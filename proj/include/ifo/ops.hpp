#ifndef IFO_OPS_HPP_
#define IFO_OPS_HPP_

#include <initializer_list>
#include <vector>

#include "ifo/tensor.hpp"

namespace ifo {

// Elementwise (shapes must match exactly; no general broadcasting).
template <class T> TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> scale(const TensorT<T>& a, T c);
template <class T> TensorT<T> shift(const TensorT<T>& a, T c);
template <class T> TensorT<T> exp(const TensorT<T>& a);
template <class T> TensorT<T> sqrt(const TensorT<T>& a);
template <class T> TensorT<T> tanh(const TensorT<T>& a);
template <class T> TensorT<T> sigmoid(const TensorT<T>& a);
template <class T> TensorT<T> leaky_relu(const TensorT<T>& a, T negative_slope);
template <class T> TensorT<T> reciprocal(const TensorT<T>& a);

// Reductions to a scalar tensor (accumulation in double).
template <class T> TensorT<T> sum(const TensorT<T>& a);
template <class T> TensorT<T> mean(const TensorT<T>& a);

// 1-D vector ops.
template <class T> TensorT<T> logsumexp(const TensorT<T>& a);
template <class T> TensorT<T> softmax(const TensorT<T>& a);

// Shape manipulation (copying; gradients map element-for-element).
template <class T> TensorT<T> reshape(const TensorT<T>& a, const Shape& shape);
// Concatenate along the last axis; inputs are all 1-D or all 2-D with equal
// leading dimension.
template <class T> TensorT<T> concat_last(const std::vector<TensorT<T>>& parts);
// Columns [start, start+len) of a 1-D or 2-D tensor.
template <class T> TensorT<T> slice_last(const TensorT<T>& a, int start, int len);
// Row i of a 2-D tensor as a vector.
template <class T> TensorT<T> row(const TensorT<T>& a, int i);
// Rows [start, start+count) of a 2-D tensor.
template <class T> TensorT<T> rows(const TensorT<T>& a, int start, int count);
// Stack equal-length vectors into a matrix [n, d].
template <class T> TensorT<T> stack_rows(const std::vector<TensorT<T>>& parts);

// y[N,Out] = x[N,In] * W[Out,In]^T (+ b[Out]). Pass undefined b to skip bias.
template <class T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b);

// Cross-correlation of x[N,C,H,W] with kernel[F,C,K,K]; no bias term
// (pair with add_channel_bias where a layer needs one).
template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& kernel, int stride,
                  int padding);

// Transposed convolution of x[N,C,H,W] with kernel[C,F,K,K]:
// output spatial size = (H-1)*stride + K + output_padding.
template <class T>
TensorT<T> conv2d_transposed(const TensorT<T>& x, const TensorT<T>& kernel,
                             int stride, int output_padding);

// x[N,C,H,W] + b[C] broadcast over N,H,W.
template <class T>
TensorT<T> add_channel_bias(const TensorT<T>& x, const TensorT<T>& b);

// Per-channel batch normalization over (N,H,W). In training mode the batch
// statistics are used and running statistics are updated in place with the
// given momentum; in eval mode the op is an affine map from running stats.
template <class T>
TensorT<T> batchnorm2d(const TensorT<T>& x, const TensorT<T>& gamma,
                       const TensorT<T>& beta, std::vector<T>& running_mean,
                       std::vector<T>& running_var, bool training, T momentum,
                       T eps);

// Composed helpers.
template <class T>
TensorT<T> dot(const TensorT<T>& a, const TensorT<T>& b) {
  return sum(mul(a, b));
}
template <class T>
TensorT<T> squared_norm(const TensorT<T>& a) {
  return sum(mul(a, a));
}
template <class T>
TensorT<T> l2_norm(const TensorT<T>& a) {
  return sqrt(squared_norm(a));
}
// cos(a, b); throws ValueError when either vector has (near-)zero norm.
template <class T>
TensorT<T> cosine(const TensorT<T>& a, const TensorT<T>& b);

template <class T> TensorT<T> neg(const TensorT<T>& a) { return scale(a, T(-1)); }

}  // namespace ifo

#endif  // IFO_OPS_HPP_
