#include "ifo/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ifo {
namespace {

template <class T>
TapeT<T>* tracking_tape(std::initializer_list<const TensorT<T>*> inputs) {
  TapeT<T>* tape = TapeT<T>::active();
  if (!tape) return nullptr;
  for (const TensorT<T>* t : inputs)
    if (t->defined() && t->requires_grad()) return tape;
  return nullptr;
}

template <class T>
void mark_output(TensorT<T>& out, TapeT<T>* tape) {
  out.set_requires_grad(true);
  out.storage()->tape = tape;
}

// C[M,N] += A[M,K] * B[K,N]
template <class T>
void mm_nn(const T* __restrict a, const T* __restrict b, T* __restrict c,
           int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* ar = a + static_cast<size_t>(i) * k;
    T* cr = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = ar[p];
      const T* br = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

// Fixed-order eight-lane dot product; the lane split keeps the reduction
// vectorizable without reassociating a single chain.
template <class T>
T dot8(const T* __restrict x, const T* __restrict y, int k) {
  T lane[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
  int p = 0;
  for (; p + 8 <= k; p += 8)
    for (int u = 0; u < 8; ++u) lane[u] += x[p + u] * y[p + u];
  T tail = T(0);
  for (; p < k; ++p) tail += x[p] * y[p];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
         ((lane[4] + lane[5]) + (lane[6] + lane[7])) + tail;
}

// C[M,N] += A[M,K] * B[N,K]^T
template <class T>
void mm_nt(const T* __restrict a, const T* __restrict b, T* __restrict c,
           int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* ar = a + static_cast<size_t>(i) * k;
    T* cr = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j)
      cr[j] += dot8(ar, b + static_cast<size_t>(j) * k, k);
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
template <class T>
void mm_tn(const T* __restrict a, const T* __restrict b, T* __restrict c,
           int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const T* ar = a + static_cast<size_t>(p) * m;
    const T* br = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T av = ar[i];
      T* cr = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

// cols[C*K*K, OH*OW] <- gather from im[C,H,W]; zero padding outside.
template <class T>
void im2col(const T* im, int c_ch, int h, int w, int k, int s, int p, int oh,
            int ow, T* cols) {
  const int64_t plane = static_cast<int64_t>(oh) * ow;
  int64_t r = 0;
  for (int c = 0; c < c_ch; ++c) {
    const T* cim = im + static_cast<int64_t>(c) * h * w;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw, ++r) {
        T* dst = cols + r * plane;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * s - p + kh;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            dst += ow;
            continue;
          }
          const T* src = cim + static_cast<int64_t>(iy) * w;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * s - p + kw;
            dst[x] = (ix < 0 || ix >= w) ? T(0) : src[ix];
          }
          dst += ow;
        }
      }
    }
  }
}

// Scatter-add inverse of im2col with the same geometry.
template <class T>
void col2im_add(const T* cols, int c_ch, int h, int w, int k, int s, int p,
                int oh, int ow, T* im) {
  const int64_t plane = static_cast<int64_t>(oh) * ow;
  int64_t r = 0;
  for (int c = 0; c < c_ch; ++c) {
    T* cim = im + static_cast<int64_t>(c) * h * w;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw, ++r) {
        const T* src = cols + r * plane;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * s - p + kh;
          if (iy < 0 || iy >= h) {
            src += ow;
            continue;
          }
          T* dst = cim + static_cast<int64_t>(iy) * w;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * s - p + kw;
            if (ix >= 0 && ix < w) dst[ix] += src[x];
          }
          src += ow;
        }
      }
    }
  }
}

template <class T, class Fwd, class Dfn>
TensorT<T> unary_elementwise(const TensorT<T>& a, Fwd fwd, Dfn dvalue) {
  auto out = TensorT<T>::zeros(a.shape());
  const auto& x = a.data();
  auto& y = out.data();
  for (size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  if (TapeT<T>* tape = tracking_tape<T>({&a})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr();
    auto so = out.storage_ptr();
    tape->record([sa, so, dvalue]() {
      if (so->grad.empty()) return;
      if (!sa->requires_grad) return;
      sa->ensure_grad();
      for (size_t i = 0; i < sa->data.size(); ++i)
        sa->grad[i] += so->grad[i] * dvalue(sa->data[i], so->data[i]);
    });
  }
  return out;
}

}  // namespace

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  check_dim(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                        " vs " + shape_str(b.shape()));
  auto out = TensorT<T>::zeros(a.shape());
  for (size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = a.data()[i] + b.data()[i];
  if (TapeT<T>* tape = tracking_tape<T>({&a, &b})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr(), sb = b.storage_ptr(), so = out.storage_ptr();
    tape->record([sa, sb, so]() {
      if (so->grad.empty()) return;
      if (sa->requires_grad) {
        sa->ensure_grad();
        for (size_t i = 0; i < sa->grad.size(); ++i) sa->grad[i] += so->grad[i];
      }
      if (sb->requires_grad) {
        sb->ensure_grad();
        for (size_t i = 0; i < sb->grad.size(); ++i) sb->grad[i] += so->grad[i];
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  check_dim(a.shape() == b.shape(), "sub: shape mismatch");
  auto out = TensorT<T>::zeros(a.shape());
  for (size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = a.data()[i] - b.data()[i];
  if (TapeT<T>* tape = tracking_tape<T>({&a, &b})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr(), sb = b.storage_ptr(), so = out.storage_ptr();
    tape->record([sa, sb, so]() {
      if (so->grad.empty()) return;
      if (sa->requires_grad) {
        sa->ensure_grad();
        for (size_t i = 0; i < sa->grad.size(); ++i) sa->grad[i] += so->grad[i];
      }
      if (sb->requires_grad) {
        sb->ensure_grad();
        for (size_t i = 0; i < sb->grad.size(); ++i) sb->grad[i] -= so->grad[i];
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  check_dim(a.shape() == b.shape(), "mul: shape mismatch");
  auto out = TensorT<T>::zeros(a.shape());
  for (size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = a.data()[i] * b.data()[i];
  if (TapeT<T>* tape = tracking_tape<T>({&a, &b})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr(), sb = b.storage_ptr(), so = out.storage_ptr();
    tape->record([sa, sb, so]() {
      if (so->grad.empty()) return;
      if (sa->requires_grad) {
        sa->ensure_grad();
        for (size_t i = 0; i < sa->grad.size(); ++i)
          sa->grad[i] += so->grad[i] * sb->data[i];
      }
      if (sb->requires_grad) {
        sb->ensure_grad();
        for (size_t i = 0; i < sb->grad.size(); ++i)
          sb->grad[i] += so->grad[i] * sa->data[i];
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> scale(const TensorT<T>& a, T c) {
  return unary_elementwise<T>(
      a, [c](T x) { return x * c; }, [c](T, T) { return c; });
}

template <class T>
TensorT<T> shift(const TensorT<T>& a, T c) {
  return unary_elementwise<T>(
      a, [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <class T>
TensorT<T> exp(const TensorT<T>& a) {
  return unary_elementwise<T>(
      a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
TensorT<T> sqrt(const TensorT<T>& a) {
  return unary_elementwise<T>(
      a, [](T x) { return std::sqrt(x); },
      [](T, T y) { return T(0.5) / y; });
}

template <class T>
TensorT<T> tanh(const TensorT<T>& a) {
  return unary_elementwise<T>(
      a, [](T x) { return std::tanh(x); },
      [](T, T y) { return T(1) - y * y; });
}

template <class T>
TensorT<T> sigmoid(const TensorT<T>& a) {
  return unary_elementwise<T>(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
TensorT<T> leaky_relu(const TensorT<T>& a, T negative_slope) {
  return unary_elementwise<T>(
      a, [negative_slope](T x) { return x >= T(0) ? x : negative_slope * x; },
      [negative_slope](T x, T) { return x >= T(0) ? T(1) : negative_slope; });
}

template <class T>
TensorT<T> reciprocal(const TensorT<T>& a) {
  return unary_elementwise<T>(
      a, [](T x) { return T(1) / x; }, [](T, T y) { return -y * y; });
}

template <class T>
TensorT<T> sum(const TensorT<T>& a) {
  double acc = 0.0;
  for (T v : a.data()) acc += static_cast<double>(v);
  auto out = TensorT<T>::scalar(static_cast<T>(acc));
  if (TapeT<T>* tape = tracking_tape<T>({&a})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr();
    auto so = out.storage_ptr();
    tape->record([sa, so]() {
      if (so->grad.empty() || !sa->requires_grad) return;
      sa->ensure_grad();
      const T g = so->grad[0];
      for (size_t i = 0; i < sa->grad.size(); ++i) sa->grad[i] += g;
    });
  }
  return out;
}

template <class T>
TensorT<T> mean(const TensorT<T>& a) {
  check_value(a.size() > 0, "mean of empty tensor");
  double acc = 0.0;
  for (T v : a.data()) acc += static_cast<double>(v);
  const T inv = T(1) / static_cast<T>(a.size());
  auto out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(a.size())));
  if (TapeT<T>* tape = tracking_tape<T>({&a})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr();
    auto so = out.storage_ptr();
    tape->record([sa, so, inv]() {
      if (so->grad.empty() || !sa->requires_grad) return;
      sa->ensure_grad();
      const T g = so->grad[0] * inv;
      for (size_t i = 0; i < sa->grad.size(); ++i) sa->grad[i] += g;
    });
  }
  return out;
}

template <class T>
TensorT<T> logsumexp(const TensorT<T>& a) {
  check_dim(a.ndim() == 1, "logsumexp expects a 1-D tensor");
  check_value(a.size() > 0, "logsumexp of empty tensor");
  T m = a.data()[0];
  for (T v : a.data()) m = std::max(m, v);
  double acc = 0.0;
  for (T v : a.data()) acc += std::exp(static_cast<double>(v - m));
  const T lse = m + static_cast<T>(std::log(acc));
  auto out = TensorT<T>::scalar(lse);
  if (TapeT<T>* tape = tracking_tape<T>({&a})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr();
    auto so = out.storage_ptr();
    tape->record([sa, so]() {
      if (so->grad.empty() || !sa->requires_grad) return;
      sa->ensure_grad();
      const T g = so->grad[0];
      const T lse_val = so->data[0];
      for (size_t i = 0; i < sa->grad.size(); ++i)
        sa->grad[i] += g * std::exp(sa->data[i] - lse_val);
    });
  }
  return out;
}

template <class T>
TensorT<T> softmax(const TensorT<T>& a) {
  check_dim(a.ndim() == 1, "softmax expects a 1-D tensor");
  check_value(a.size() > 0, "softmax of empty tensor");
  T m = a.data()[0];
  for (T v : a.data()) m = std::max(m, v);
  double acc = 0.0;
  for (T v : a.data()) acc += std::exp(static_cast<double>(v - m));
  auto out = TensorT<T>::zeros(a.shape());
  for (size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = static_cast<T>(std::exp(static_cast<double>(a.data()[i] - m)) / acc);
  if (TapeT<T>* tape = tracking_tape<T>({&a})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr();
    auto so = out.storage_ptr();
    tape->record([sa, so]() {
      if (so->grad.empty() || !sa->requires_grad) return;
      sa->ensure_grad();
      double dotv = 0.0;
      for (size_t i = 0; i < so->data.size(); ++i)
        dotv += static_cast<double>(so->grad[i]) * so->data[i];
      for (size_t i = 0; i < sa->grad.size(); ++i)
        sa->grad[i] += so->data[i] * (so->grad[i] - static_cast<T>(dotv));
    });
  }
  return out;
}

template <class T>
TensorT<T> reshape(const TensorT<T>& a, const Shape& shape) {
  check_dim(numel(shape) == a.size(), "reshape: element count mismatch");
  auto out = TensorT<T>::from_data(shape, a.data());
  if (TapeT<T>* tape = tracking_tape<T>({&a})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr();
    auto so = out.storage_ptr();
    tape->record([sa, so]() {
      if (so->grad.empty() || !sa->requires_grad) return;
      sa->ensure_grad();
      for (size_t i = 0; i < sa->grad.size(); ++i) sa->grad[i] += so->grad[i];
    });
  }
  return out;
}

namespace {
// Shared geometry for concat_last / slice_last on 1-D and 2-D tensors.
template <class T>
void concat_geometry(const std::vector<TensorT<T>>& parts, int* lead,
                     std::vector<int>* widths, int* total) {
  check_value(!parts.empty(), "concat of zero tensors");
  const int nd = parts.front().ndim();
  check_dim(nd == 1 || nd == 2, "concat_last supports 1-D and 2-D only");
  *lead = nd == 2 ? parts.front().dim(0) : 1;
  *total = 0;
  for (const auto& p : parts) {
    check_dim(p.ndim() == nd, "concat_last: mixed ranks");
    if (nd == 2) check_dim(p.dim(0) == *lead, "concat_last: leading dim mismatch");
    const int wdt = nd == 2 ? p.dim(1) : p.dim(0);
    widths->push_back(wdt);
    *total += wdt;
  }
}
}  // namespace

template <class T>
TensorT<T> concat_last(const std::vector<TensorT<T>>& parts) {
  int lead = 1, total = 0;
  std::vector<int> widths;
  concat_geometry(parts, &lead, &widths, &total);
  const int nd = parts.front().ndim();
  auto out = TensorT<T>::zeros(nd == 2 ? Shape{lead, total} : Shape{total});
  int off = 0;
  for (size_t p = 0; p < parts.size(); ++p) {
    const auto& src = parts[p].data();
    for (int r = 0; r < lead; ++r)
      std::memcpy(out.data().data() + static_cast<size_t>(r) * total + off,
                  src.data() + static_cast<size_t>(r) * widths[p],
                  sizeof(T) * static_cast<size_t>(widths[p]));
    off += widths[p];
  }
  TapeT<T>* tape = TapeT<T>::active();
  bool any = false;
  if (tape)
    for (const auto& p : parts) any = any || p.requires_grad();
  if (tape && any) {
    mark_output(out, tape);
    std::vector<std::shared_ptr<TensorStorageT<T>>> srcs;
    for (const auto& p : parts) srcs.push_back(p.storage_ptr());
    auto so = out.storage_ptr();
    tape->record([srcs, so, widths, lead, total]() {
      if (so->grad.empty()) return;
      int off2 = 0;
      for (size_t p = 0; p < srcs.size(); ++p) {
        if (srcs[p]->requires_grad) {
          srcs[p]->ensure_grad();
          for (int r = 0; r < lead; ++r)
            for (int j = 0; j < widths[p]; ++j)
              srcs[p]->grad[static_cast<size_t>(r) * widths[p] + j] +=
                  so->grad[static_cast<size_t>(r) * total + off2 + j];
        }
        off2 += widths[p];
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> slice_last(const TensorT<T>& a, int start, int len) {
  const int nd = a.ndim();
  check_dim(nd == 1 || nd == 2, "slice_last supports 1-D and 2-D only");
  const int lead = nd == 2 ? a.dim(0) : 1;
  const int width = nd == 2 ? a.dim(1) : a.dim(0);
  check_dim(start >= 0 && len >= 1 && start + len <= width,
            "slice_last out of range");
  auto out = TensorT<T>::zeros(nd == 2 ? Shape{lead, len} : Shape{len});
  for (int r = 0; r < lead; ++r)
    std::memcpy(out.data().data() + static_cast<size_t>(r) * len,
                a.data().data() + static_cast<size_t>(r) * width + start,
                sizeof(T) * static_cast<size_t>(len));
  if (TapeT<T>* tape = tracking_tape<T>({&a})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr();
    auto so = out.storage_ptr();
    tape->record([sa, so, start, len, lead, width]() {
      if (so->grad.empty() || !sa->requires_grad) return;
      sa->ensure_grad();
      for (int r = 0; r < lead; ++r)
        for (int j = 0; j < len; ++j)
          sa->grad[static_cast<size_t>(r) * width + start + j] +=
              so->grad[static_cast<size_t>(r) * len + j];
    });
  }
  return out;
}

template <class T>
TensorT<T> row(const TensorT<T>& a, int i) {
  check_dim(a.ndim() == 2, "row expects a 2-D tensor");
  check_dim(i >= 0 && i < a.dim(0), "row index out of range");
  const int width = a.dim(1);
  auto out = TensorT<T>::zeros(Shape{width});
  std::memcpy(out.data().data(), a.data().data() + static_cast<size_t>(i) * width,
              sizeof(T) * static_cast<size_t>(width));
  if (TapeT<T>* tape = tracking_tape<T>({&a})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr();
    auto so = out.storage_ptr();
    tape->record([sa, so, i, width]() {
      if (so->grad.empty() || !sa->requires_grad) return;
      sa->ensure_grad();
      for (int j = 0; j < width; ++j)
        sa->grad[static_cast<size_t>(i) * width + j] += so->grad[j];
    });
  }
  return out;
}

template <class T>
TensorT<T> rows(const TensorT<T>& a, int start, int count) {
  check_dim(a.ndim() == 2, "rows expects a 2-D tensor");
  check_dim(start >= 0 && count >= 1 && start + count <= a.dim(0),
            "rows range out of bounds");
  const int width = a.dim(1);
  auto out = TensorT<T>::zeros(Shape{count, width});
  std::memcpy(out.data().data(),
              a.data().data() + static_cast<size_t>(start) * width,
              sizeof(T) * static_cast<size_t>(count) * width);
  if (TapeT<T>* tape = tracking_tape<T>({&a})) {
    mark_output(out, tape);
    auto sa = a.storage_ptr();
    auto so = out.storage_ptr();
    tape->record([sa, so, start, count, width]() {
      if (so->grad.empty() || !sa->requires_grad) return;
      sa->ensure_grad();
      for (size_t j = 0; j < static_cast<size_t>(count) * width; ++j)
        sa->grad[static_cast<size_t>(start) * width + j] += so->grad[j];
    });
  }
  return out;
}

template <class T>
TensorT<T> stack_rows(const std::vector<TensorT<T>>& parts) {
  check_value(!parts.empty(), "stack_rows of zero tensors");
  const int width = parts.front().dim(0);
  for (const auto& p : parts)
    check_dim(p.ndim() == 1 && p.dim(0) == width, "stack_rows: ragged inputs");
  const int n = static_cast<int>(parts.size());
  auto out = TensorT<T>::zeros(Shape{n, width});
  for (int i = 0; i < n; ++i)
    std::memcpy(out.data().data() + static_cast<size_t>(i) * width,
                parts[static_cast<size_t>(i)].data().data(),
                sizeof(T) * static_cast<size_t>(width));
  TapeT<T>* tape = TapeT<T>::active();
  bool any = false;
  if (tape)
    for (const auto& p : parts) any = any || p.requires_grad();
  if (tape && any) {
    mark_output(out, tape);
    std::vector<std::shared_ptr<TensorStorageT<T>>> srcs;
    for (const auto& p : parts) srcs.push_back(p.storage_ptr());
    auto so = out.storage_ptr();
    tape->record([srcs, so, width]() {
      if (so->grad.empty()) return;
      for (size_t i = 0; i < srcs.size(); ++i) {
        if (!srcs[i]->requires_grad) continue;
        srcs[i]->ensure_grad();
        for (int j = 0; j < width; ++j)
          srcs[i]->grad[j] += so->grad[i * static_cast<size_t>(width) + j];
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  check_dim(x.ndim() == 2 && w.ndim() == 2, "linear expects 2-D x and w");
  const int n = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
  check_dim(w.dim(1) == in, "linear: weight input dim " + std::to_string(w.dim(1)) +
                                " vs x " + std::to_string(in));
  if (b.defined())
    check_dim(b.ndim() == 1 && b.dim(0) == out_dim, "linear: bias shape");
  auto out = TensorT<T>::zeros(Shape{n, out_dim});
  mm_nt(x.data().data(), w.data().data(), out.data().data(), n, in, out_dim);
  if (b.defined()) {
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < out_dim; ++o)
        out.data()[static_cast<size_t>(i) * out_dim + o] += b.data()[o];
  }
  TapeT<T>* tape = b.defined() ? tracking_tape<T>({&x, &w, &b})
                               : tracking_tape<T>({&x, &w});
  if (tape) {
    mark_output(out, tape);
    auto sx = x.storage_ptr(), sw = w.storage_ptr(), so = out.storage_ptr();
    auto sb = b.defined() ? b.storage_ptr() : nullptr;
    tape->record([sx, sw, sb, so, n, in, out_dim]() {
      if (so->grad.empty()) return;
      if (sx->requires_grad) {
        sx->ensure_grad();
        mm_nn(so->grad.data(), sw->data.data(), sx->grad.data(), n, out_dim, in);
      }
      if (sw->requires_grad) {
        sw->ensure_grad();
        mm_tn(so->grad.data(), sx->data.data(), sw->grad.data(), out_dim, n, in);
      }
      if (sb && sb->requires_grad) {
        sb->ensure_grad();
        for (int i = 0; i < n; ++i)
          for (int o = 0; o < out_dim; ++o)
            sb->grad[o] += so->grad[static_cast<size_t>(i) * out_dim + o];
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& kernel, int stride,
                  int padding) {
  check_dim(x.ndim() == 4 && kernel.ndim() == 4, "conv2d expects 4-D tensors");
  check_value(stride >= 1, "conv2d: stride must be >= 1");
  check_value(padding >= 0, "conv2d: padding must be >= 0");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int f = kernel.dim(0), kc = kernel.dim(1), k = kernel.dim(2);
  check_dim(kernel.dim(3) == k, "conv2d: kernel must be square");
  check_dim(kc == c, "conv2d: input channels " + std::to_string(c) +
                         " do not match kernel channels " + std::to_string(kc));
  check_dim(k <= h + 2 * padding && k <= w + 2 * padding,
            "conv2d: kernel larger than padded input");
  const int oh = (h + 2 * padding - k) / stride + 1;
  const int ow = (w + 2 * padding - k) / stride + 1;
  const int ckk = c * k * k;
  const int64_t ohw = static_cast<int64_t>(oh) * ow;

  auto out = TensorT<T>::zeros(Shape{n, f, oh, ow});
  std::vector<T> cols(static_cast<size_t>(ckk) * ohw);
  for (int i = 0; i < n; ++i) {
    im2col(x.data().data() + static_cast<int64_t>(i) * c * h * w, c, h, w, k,
           stride, padding, oh, ow, cols.data());
    // With a single output pixel the column matrix is a vector; the
    // dot-product form vectorizes where the rank-1 matmul cannot.
    if (ohw == 1)
      mm_nt(kernel.data().data(), cols.data(),
            out.data().data() + static_cast<int64_t>(i) * f, f, ckk, 1);
    else
      mm_nn(kernel.data().data(), cols.data(),
            out.data().data() + static_cast<int64_t>(i) * f * ohw, f, ckk,
            static_cast<int>(ohw));
  }

  if (TapeT<T>* tape = tracking_tape<T>({&x, &kernel})) {
    mark_output(out, tape);
    auto sx = x.storage_ptr(), sk = kernel.storage_ptr(), so = out.storage_ptr();
    tape->record([sx, sk, so, n, c, h, w, f, k, stride, padding, oh, ow]() {
      if (so->grad.empty()) return;
      const int ckk2 = c * k * k;
      const int64_t ohw2 = static_cast<int64_t>(oh) * ow;
      std::vector<T> cols2(static_cast<size_t>(ckk2) * ohw2);
      std::vector<T> dcols(static_cast<size_t>(ckk2) * ohw2);
      if (sx->requires_grad) sx->ensure_grad();
      if (sk->requires_grad) sk->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const T* dout = so->grad.data() + static_cast<int64_t>(i) * f * ohw2;
        if (sk->requires_grad) {
          im2col(sx->data.data() + static_cast<int64_t>(i) * c * h * w, c, h, w,
                 k, stride, padding, oh, ow, cols2.data());
          if (ohw2 == 1)
            mm_nn(dout, cols2.data(), sk->grad.data(), f, 1, ckk2);
          else
            mm_nt(dout, cols2.data(), sk->grad.data(), f,
                  static_cast<int>(ohw2), ckk2);
        }
        if (sx->requires_grad) {
          std::fill(dcols.begin(), dcols.end(), T(0));
          if (ohw2 == 1)
            mm_nn(dout, sk->data.data(), dcols.data(), 1, f, ckk2);
          else
            mm_tn(sk->data.data(), dout, dcols.data(), ckk2, f,
                  static_cast<int>(ohw2));
          col2im_add(dcols.data(), c, h, w, k, stride, padding, oh, ow,
                     sx->grad.data() + static_cast<int64_t>(i) * c * h * w);
        }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> conv2d_transposed(const TensorT<T>& x, const TensorT<T>& kernel,
                             int stride, int output_padding) {
  check_dim(x.ndim() == 4 && kernel.ndim() == 4,
            "conv2d_transposed expects 4-D tensors");
  check_value(stride >= 1, "conv2d_transposed: stride must be >= 1");
  check_value(output_padding >= 0,
              "conv2d_transposed: output_padding must be >= 0");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int kc = kernel.dim(0), f = kernel.dim(1), k = kernel.dim(2);
  check_dim(kernel.dim(3) == k, "conv2d_transposed: kernel must be square");
  check_dim(kc == c, "conv2d_transposed: input channels do not match kernel");
  const int oh = (h - 1) * stride + k + output_padding;
  const int ow = (w - 1) * stride + k + output_padding;
  const int fkk = f * k * k;
  const int64_t hw = static_cast<int64_t>(h) * w;

  auto out = TensorT<T>::zeros(Shape{n, f, oh, ow});
  std::vector<T> cols(static_cast<size_t>(fkk) * hw);
  for (int i = 0; i < n; ++i) {
    std::fill(cols.begin(), cols.end(), T(0));
    if (hw == 1)
      mm_nn(x.data().data() + static_cast<int64_t>(i) * c, kernel.data().data(),
            cols.data(), 1, c, fkk);
    else
      mm_tn(kernel.data().data(),
            x.data().data() + static_cast<int64_t>(i) * c * hw, cols.data(),
            fkk, c, static_cast<int>(hw));
    col2im_add(cols.data(), f, oh, ow, k, stride, 0, h, w,
               out.data().data() + static_cast<int64_t>(i) * f * oh * ow);
  }

  if (TapeT<T>* tape = tracking_tape<T>({&x, &kernel})) {
    mark_output(out, tape);
    auto sx = x.storage_ptr(), sk = kernel.storage_ptr(), so = out.storage_ptr();
    tape->record([sx, sk, so, n, c, h, w, f, k, stride, oh, ow]() {
      if (so->grad.empty()) return;
      const int fkk2 = f * k * k;
      const int64_t hw2 = static_cast<int64_t>(h) * w;
      std::vector<T> dcols(static_cast<size_t>(fkk2) * hw2);
      if (sx->requires_grad) sx->ensure_grad();
      if (sk->requires_grad) sk->ensure_grad();
      for (int i = 0; i < n; ++i) {
        im2col(so->grad.data() + static_cast<int64_t>(i) * f * oh * ow, f, oh,
               ow, k, stride, 0, h, w, dcols.data());
        if (sx->requires_grad) {
          if (hw2 == 1)
            mm_nt(sk->data.data(), dcols.data(),
                  sx->grad.data() + static_cast<int64_t>(i) * c, c, fkk2, 1);
          else
            mm_nn(sk->data.data(), dcols.data(),
                  sx->grad.data() + static_cast<int64_t>(i) * c * hw2, c, fkk2,
                  static_cast<int>(hw2));
        }
        if (sk->requires_grad) {
          if (hw2 == 1)
            mm_nn(sx->data.data() + static_cast<int64_t>(i) * c, dcols.data(),
                  sk->grad.data(), c, 1, fkk2);
          else
            mm_nt(sx->data.data() + static_cast<int64_t>(i) * c * hw2,
                  dcols.data(), sk->grad.data(), c, static_cast<int>(hw2),
                  fkk2);
        }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> add_channel_bias(const TensorT<T>& x, const TensorT<T>& b) {
  check_dim(x.ndim() == 4, "add_channel_bias expects [N,C,H,W]");
  const int n = x.dim(0), c = x.dim(1);
  const int64_t plane = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  check_dim(b.ndim() == 1 && b.dim(0) == c, "add_channel_bias: bias shape");
  auto out = TensorT<T>::zeros(x.shape());
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const T bv = b.data()[ch];
      const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
      for (int64_t p = 0; p < plane; ++p)
        out.data()[base + p] = x.data()[base + p] + bv;
    }
  if (TapeT<T>* tape = tracking_tape<T>({&x, &b})) {
    mark_output(out, tape);
    auto sx = x.storage_ptr(), sb = b.storage_ptr(), so = out.storage_ptr();
    tape->record([sx, sb, so, n, c, plane]() {
      if (so->grad.empty()) return;
      if (sx->requires_grad) {
        sx->ensure_grad();
        for (size_t i = 0; i < sx->grad.size(); ++i) sx->grad[i] += so->grad[i];
      }
      if (sb->requires_grad) {
        sb->ensure_grad();
        for (int i = 0; i < n; ++i)
          for (int ch = 0; ch < c; ++ch) {
            const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
            T acc = T(0);
            for (int64_t p = 0; p < plane; ++p) acc += so->grad[base + p];
            sb->grad[ch] += acc;
          }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> batchnorm2d(const TensorT<T>& x, const TensorT<T>& gamma,
                       const TensorT<T>& beta, std::vector<T>& running_mean,
                       std::vector<T>& running_var, bool training, T momentum,
                       T eps) {
  check_dim(x.ndim() == 4, "batchnorm2d expects [N,C,H,W]");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  check_dim(gamma.ndim() == 1 && gamma.dim(0) == c, "batchnorm2d: gamma shape");
  check_dim(beta.ndim() == 1 && beta.dim(0) == c, "batchnorm2d: beta shape");
  check_dim(static_cast<int>(running_mean.size()) == c &&
                static_cast<int>(running_var.size()) == c,
            "batchnorm2d: running stats size");
  const int64_t plane = static_cast<int64_t>(h) * w;
  const int64_t m = static_cast<int64_t>(n) * plane;

  auto out = TensorT<T>::zeros(x.shape());
  std::vector<T> mean_c(c), invstd_c(c);
  if (training) {
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
        for (int64_t p = 0; p < plane; ++p) acc += x.data()[base + p];
      }
      const double mu = acc / static_cast<double>(m);
      double var = 0.0;
      for (int i = 0; i < n; ++i) {
        const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
        for (int64_t p = 0; p < plane; ++p) {
          const double d = x.data()[base + p] - mu;
          var += d * d;
        }
      }
      var /= static_cast<double>(m);
      mean_c[ch] = static_cast<T>(mu);
      invstd_c[ch] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * static_cast<T>(mu);
      running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * static_cast<T>(var);
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean_c[ch] = running_mean[ch];
      invstd_c[ch] =
          static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[ch]) +
                                         static_cast<double>(eps)));
    }
  }
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
      const T mu = mean_c[ch], is = invstd_c[ch];
      const T g = gamma.data()[ch], bt = beta.data()[ch];
      for (int64_t p = 0; p < plane; ++p)
        out.data()[base + p] = (x.data()[base + p] - mu) * is * g + bt;
    }

  if (TapeT<T>* tape = tracking_tape<T>({&x, &gamma, &beta})) {
    mark_output(out, tape);
    auto sx = x.storage_ptr(), sg = gamma.storage_ptr(), sb = beta.storage_ptr(),
         so = out.storage_ptr();
    tape->record([sx, sg, sb, so, mean_c, invstd_c, training, n, c, plane, m]() {
      if (so->grad.empty()) return;
      for (int ch = 0; ch < c; ++ch) {
        const T mu = mean_c[ch], is = invstd_c[ch], g = sg->data[ch];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < n; ++i) {
          const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
          for (int64_t p = 0; p < plane; ++p) {
            const T dy = so->grad[base + p];
            sum_dy += dy;
            sum_dy_xhat += static_cast<double>(dy) * (sx->data[base + p] - mu) * is;
          }
        }
        if (sg->requires_grad) {
          sg->ensure_grad();
          sg->grad[ch] += static_cast<T>(sum_dy_xhat);
        }
        if (sb->requires_grad) {
          sb->ensure_grad();
          sb->grad[ch] += static_cast<T>(sum_dy);
        }
        if (sx->requires_grad) {
          sx->ensure_grad();
          const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(m));
          const T mean_dy_xhat =
              static_cast<T>(sum_dy_xhat / static_cast<double>(m));
          for (int i = 0; i < n; ++i) {
            const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
            for (int64_t p = 0; p < plane; ++p) {
              const T xhat = (sx->data[base + p] - mu) * is;
              if (training) {
                sx->grad[base + p] +=
                    g * is * (so->grad[base + p] - mean_dy - xhat * mean_dy_xhat);
              } else {
                sx->grad[base + p] += g * is * so->grad[base + p];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> cosine(const TensorT<T>& a, const TensorT<T>& b) {
  check_dim(a.shape() == b.shape(), "cosine: shape mismatch");
  double na = 0.0, nb = 0.0;
  for (T v : a.data()) na += static_cast<double>(v) * v;
  for (T v : b.data()) nb += static_cast<double>(v) * v;
  check_value(na > 1e-24 && nb > 1e-24, "cosine: zero-norm input");
  auto prod = mul(l2_norm(a), l2_norm(b));
  return mul(dot(a, b), reciprocal(prod));
}

#define IFO_INSTANTIATE_OPS(T)                                                  \
  template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);             \
  template TensorT<T> sub<T>(const TensorT<T>&, const TensorT<T>&);             \
  template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);             \
  template TensorT<T> scale<T>(const TensorT<T>&, T);                           \
  template TensorT<T> shift<T>(const TensorT<T>&, T);                           \
  template TensorT<T> exp<T>(const TensorT<T>&);                                \
  template TensorT<T> sqrt<T>(const TensorT<T>&);                               \
  template TensorT<T> tanh<T>(const TensorT<T>&);                               \
  template TensorT<T> sigmoid<T>(const TensorT<T>&);                            \
  template TensorT<T> leaky_relu<T>(const TensorT<T>&, T);                      \
  template TensorT<T> reciprocal<T>(const TensorT<T>&);                         \
  template TensorT<T> sum<T>(const TensorT<T>&);                                \
  template TensorT<T> mean<T>(const TensorT<T>&);                               \
  template TensorT<T> logsumexp<T>(const TensorT<T>&);                          \
  template TensorT<T> softmax<T>(const TensorT<T>&);                            \
  template TensorT<T> reshape<T>(const TensorT<T>&, const Shape&);              \
  template TensorT<T> concat_last<T>(const std::vector<TensorT<T>>&);           \
  template TensorT<T> slice_last<T>(const TensorT<T>&, int, int);               \
  template TensorT<T> row<T>(const TensorT<T>&, int);                           \
  template TensorT<T> rows<T>(const TensorT<T>&, int, int);                     \
  template TensorT<T> stack_rows<T>(const std::vector<TensorT<T>>&);            \
  template TensorT<T> linear<T>(const TensorT<T>&, const TensorT<T>&,           \
                                const TensorT<T>&);                             \
  template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, int, int); \
  template TensorT<T> conv2d_transposed<T>(const TensorT<T>&, const TensorT<T>&, \
                                           int, int);                          \
  template TensorT<T> add_channel_bias<T>(const TensorT<T>&, const TensorT<T>&); \
  template TensorT<T> batchnorm2d<T>(const TensorT<T>&, const TensorT<T>&,      \
                                     const TensorT<T>&, std::vector<T>&,        \
                                     std::vector<T>&, bool, T, T);              \
  template TensorT<T> cosine<T>(const TensorT<T>&, const TensorT<T>&);

IFO_INSTANTIATE_OPS(float)
IFO_INSTANTIATE_OPS(double)

#undef IFO_INSTANTIATE_OPS

}  // namespace ifo
