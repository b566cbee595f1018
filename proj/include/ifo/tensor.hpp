#ifndef IFO_TENSOR_HPP_
#define IFO_TENSOR_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "ifo/common.hpp"
#include "ifo/rng.hpp"

namespace ifo {

// Dense n-dimensional array of scalars T, row-major contiguous. A TensorT is
// a cheap handle: copies share the same storage. Gradients live next to the
// data and are filled by replaying the active tape backwards.
template <class T>
struct TensorStorageT {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until backward touches this tensor
  bool requires_grad = false;
  const void* tape = nullptr;  // tape that produced this tensor, null for leaves

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

template <class T>
class TensorT {
 public:
  using Storage = TensorStorageT<T>;

  TensorT() = default;
  explicit TensorT(std::shared_ptr<Storage> s) : s_(std::move(s)) {}

  static TensorT zeros(const Shape& shape, bool requires_grad = false) {
    return filled(shape, T(0), requires_grad);
  }
  static TensorT filled(const Shape& shape, T value, bool requires_grad = false) {
    auto s = std::make_shared<Storage>();
    s->shape = shape;
    s->data.assign(static_cast<size_t>(numel(shape)), value);
    s->requires_grad = requires_grad;
    return TensorT(std::move(s));
  }
  static TensorT from_data(const Shape& shape, std::vector<T> values,
                           bool requires_grad = false) {
    check_dim(static_cast<int64_t>(values.size()) == numel(shape),
              "tensor data length does not match shape " + shape_str(shape));
    auto s = std::make_shared<Storage>();
    s->shape = shape;
    s->data = std::move(values);
    s->requires_grad = requires_grad;
    return TensorT(std::move(s));
  }
  static TensorT scalar(T value, bool requires_grad = false) {
    return from_data({1}, {value}, requires_grad);
  }
  static TensorT randn(const Shape& shape, Rng& rng, T stddev = T(1),
                       bool requires_grad = false) {
    auto t = zeros(shape, requires_grad);
    for (auto& v : t.data()) v = static_cast<T>(rng.normal(0.0, stddev));
    return t;
  }
  static TensorT uniform(const Shape& shape, Rng& rng, T lo, T hi,
                         bool requires_grad = false) {
    auto t = zeros(shape, requires_grad);
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  bool defined() const { return s_ != nullptr; }
  const Shape& shape() const { return s_->shape; }
  int dim(int i) const { return s_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(s_->shape.size()); }
  int64_t size() const { return static_cast<int64_t>(s_->data.size()); }

  std::vector<T>& data() { return s_->data; }
  const std::vector<T>& data() const { return s_->data; }
  std::vector<T>& grad() { return s_->grad; }
  const std::vector<T>& grad() const { return s_->grad; }
  bool has_grad() const { return !s_->grad.empty(); }

  T item() const {
    check_contract(size() == 1, "item() requires a single-element tensor");
    return s_->data[0];
  }
  T at(int64_t i) const { return s_->data[static_cast<size_t>(i)]; }

  bool requires_grad() const { return s_->requires_grad; }
  TensorT& set_requires_grad(bool v) {
    s_->requires_grad = v;
    return *this;
  }
  void zero_grad() { s_->grad.clear(); }

  Storage* storage() const { return s_.get(); }
  std::shared_ptr<Storage> storage_ptr() const { return s_; }

  // Deep copy of values only; the copy is a fresh leaf.
  TensorT clone_detached() const {
    auto s = std::make_shared<Storage>();
    s->shape = s_->shape;
    s->data = s_->data;
    s->requires_grad = false;
    return TensorT(std::move(s));
  }

 private:
  std::shared_ptr<Storage> s_;
};

// Records one backward rule per forward operation. Append-only during the
// forward pass; replayed strictly in reverse during backward().
template <class T>
class TapeT {
 public:
  using BackwardFn = std::function<void()>;

  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  void record(BackwardFn fn) { nodes_.push_back(std::move(fn)); }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  static TapeT*& active() {
    thread_local TapeT* current = nullptr;
    return current;
  }

  // Seeds d(root)/d(root) = 1 and replays all recorded rules in reverse.
  // Gradients accumulate additively across multiple uses of a tensor.
  void backward(const TensorT<T>& root) {
    check_contract(root.size() == 1, "backward root must be scalar");
    check_contract(root.storage()->tape == this,
                   "backward root was not produced on this tape");
    root.storage()->ensure_grad();
    root.storage()->grad[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<BackwardFn> nodes_;
};

// RAII activation of a tape for the current thread. Ops record backward
// rules only while a tape is active and some input requires gradients.
template <class T>
class TapeScopeT {
 public:
  TapeScopeT() : prev_(TapeT<T>::active()) { TapeT<T>::active() = &tape_; }
  ~TapeScopeT() { TapeT<T>::active() = prev_; }
  TapeScopeT(const TapeScopeT&) = delete;
  TapeScopeT& operator=(const TapeScopeT&) = delete;

  TapeT<T>& tape() { return tape_; }
  void backward(const TensorT<T>& root) { tape_.backward(root); }

 private:
  TapeT<T> tape_;
  TapeT<T>* prev_;
};

// Convenience: backward on the thread's active tape.
template <class T>
void backward(const TensorT<T>& root) {
  TapeT<T>* tape = TapeT<T>::active();
  check_contract(tape != nullptr, "backward requires an active tape");
  tape->backward(root);
}

using Tensor = TensorT<float>;
using Tape = TapeT<float>;
using TapeScope = TapeScopeT<float>;

}  // namespace ifo

#endif  // IFO_TENSOR_HPP_
