#include <cmath>

#include "doctest.h"
#include "ifo/nn.hpp"
#include "ifo/ops.hpp"
#include "ifo/tensor.hpp"

using namespace ifo;

TEST_CASE("tensor shape and data invariants") {
  CHECK_THROWS_AS(Tensor::from_data({2, 3}, {1.f, 2.f}), DimError);
  auto t = Tensor::from_data({2, 2}, {1.f, 2.f, 3.f, 4.f});
  CHECK(t.size() == 4);
}

TEST_CASE("item requires scalar") {
  auto t = Tensor::from_data({2}, {1.f, 2.f});
  CHECK_THROWS_AS(t.item(), ContractError);
}

TEST_CASE("backward computes hand chain rule") {
  SUBCASE("f(x) = x*x at 3 -> 6") {
    auto x = Tensor::scalar(3.f, true);
    TapeScope scope;
    auto y = mul(x, x);
    scope.backward(y);
    CHECK(x.grad()[0] == doctest::Approx(6.f));
  }
  SUBCASE("f(x,y) = x*y + x at (2,5) -> dx=6, dy=2") {
    auto x = Tensor::scalar(2.f, true);
    auto y = Tensor::scalar(5.f, true);
    TapeScope scope;
    auto f = add(mul(x, y), x);
    scope.backward(f);
    CHECK(x.grad()[0] == doctest::Approx(6.f));
    CHECK(y.grad()[0] == doctest::Approx(2.f));
  }
}

TEST_CASE("backward contract errors") {
  auto x = Tensor::from_data({2}, {1.f, 2.f}, true);
  TapeScope scope;
  auto y = scale(x, 2.f);
  CHECK_THROWS_AS(scope.backward(y), ContractError);  // not scalar
  auto leaf = Tensor::scalar(1.f, true);
  CHECK_THROWS_AS(scope.backward(leaf), ContractError);  // not from this tape
}

TEST_CASE("gradients accumulate additively across uses") {
  auto x = Tensor::scalar(1.5f, true);
  TapeScope scope;
  auto y = add(mul(x, x), mul(x, x));  // 2x^2 -> dy/dx = 4x
  scope.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.f));
}

TEST_CASE("forward evaluation is pure and bitwise deterministic") {
  Rng rng(7);
  auto x = Tensor::randn({2, 3, 6, 6}, rng);
  auto w = Tensor::randn({4, 3, 3, 3}, rng);
  auto a = conv2d(x, w, 2, 1);
  auto b = conv2d(x, w, 2, 1);
  CHECK(a.data() == b.data());
}

TEST_CASE("conv2d scalar case equals product") {
  auto x = Tensor::from_data({1, 1, 1, 1}, {3.f});
  auto w = Tensor::from_data({1, 1, 1, 1}, {-2.5f});
  auto y = conv2d(x, w, 1, 0);
  CHECK(y.data()[0] == doctest::Approx(-7.5f));
}

TEST_CASE("conv2d shape matches the strided 5x5 stack arithmetic") {
  auto x = Tensor::zeros({1, 1, 64, 64});
  auto w = Tensor::zeros({64, 1, 5, 5});
  auto y = conv2d(x, w, 2, 0);
  CHECK(y.shape() == Shape{1, 64, 30, 30});
}

TEST_CASE("conv2d rejects channel mismatch and bad params") {
  auto x = Tensor::zeros({1, 2, 4, 4});
  auto w = Tensor::zeros({3, 1, 3, 3});
  CHECK_THROWS_AS(conv2d(x, w, 1, 0), DimError);
  auto w2 = Tensor::zeros({3, 2, 3, 3});
  CHECK_THROWS_AS(conv2d(x, w2, 0, 0), ValueError);
  auto wbig = Tensor::zeros({3, 2, 7, 7});
  CHECK_THROWS_AS(conv2d(x, wbig, 1, 0), DimError);
}

TEST_CASE("conv2d_transposed scalar case and parameter errors") {
  auto x = Tensor::from_data({1, 1, 1, 1}, {4.f});
  auto w = Tensor::from_data({1, 1, 1, 1}, {0.5f});
  auto y = conv2d_transposed(x, w, 1, 0);
  CHECK(y.data()[0] == doctest::Approx(2.f));
  CHECK_THROWS_AS(conv2d_transposed(x, w, 1, -1), ValueError);
}

TEST_CASE("transposed conv shape stack reaches the configured frame size") {
  // Strides/output paddings of the desk decoder rows: 1 -> 5 -> 14 -> 32.
  Rng rng(3);
  auto x = Tensor::randn({1, 128, 1, 1}, rng);
  auto w1 = Tensor::randn({128, 64, 5, 5}, rng);
  auto h1 = conv2d_transposed(x, w1, 2, 0);
  CHECK(h1.shape() == Shape{1, 64, 5, 5});
  auto w2 = Tensor::randn({64, 32, 5, 5}, rng);
  auto h2 = conv2d_transposed(h1, w2, 2, 1);
  CHECK(h2.shape() == Shape{1, 32, 14, 14});
  auto w3 = Tensor::randn({32, 3, 5, 5}, rng);
  auto h3 = conv2d_transposed(h2, w3, 2, 1);
  CHECK(h3.shape() == Shape{1, 3, 32, 32});
}

TEST_CASE("batchnorm eval mode is a per-channel affine map") {
  BatchNorm2dLayerT<float> bn;
  bn.init(2);
  bn.running_mean = {0.5f, -1.f};
  bn.running_var = {4.f, 0.25f};
  Rng rng(11);
  auto x1 = Tensor::randn({3, 2, 2, 2}, rng);
  auto y1 = bn.forward(x1, false);
  // Same element value inside a different batch must map identically.
  auto x2 = Tensor::randn({5, 2, 2, 2}, rng);
  x2.data()[0] = x1.data()[0];
  auto y2 = bn.forward(x2, false);
  CHECK(y1.data()[0] == y2.data()[0]);
}

TEST_CASE("lstm_step zero parameters give zero state") {
  LstmLayerT<float> cell;
  Rng rng(5);
  cell.init(3, 4, rng);
  for (auto& v : cell.wx.data()) v = 0.f;
  for (auto& v : cell.wh.data()) v = 0.f;
  for (auto& v : cell.b.data()) v = 0.f;
  auto x = Tensor::randn({2, 3}, rng);
  auto h = Tensor::zeros({2, 4});
  auto c = Tensor::zeros({2, 4});
  auto [h2, c2] = cell.step(x, h, c);
  for (float v : h2.data()) CHECK(v == 0.f);
  for (float v : c2.data()) CHECK(v == 0.f);

  auto [h3, c3] = cell.step(x, h, c);
  CHECK(h2.data() == h3.data());
  CHECK(c2.data() == c3.data());
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  auto p = Tensor::from_data({3}, {1.f, -2.f, 0.5f}, true);
  Adam opt({p}, 1e-3f);
  p.zero_grad();
  opt.step();
  CHECK(opt.step_count() == 1);
  CHECK(p.data() == std::vector<float>{1.f, -2.f, 0.5f});
}

TEST_CASE("adam first step moves by about lr in the gradient direction") {
  auto p = Tensor::scalar(0.f, true);
  const float lr = 1e-2f;
  Adam opt({p}, lr);
  p.grad().assign(1, 0.37f);
  opt.step();
  // At step 1, m_hat/sqrt(v_hat) = sign(g) up to the eps correction.
  CHECK(std::abs(p.data()[0] + lr) < 1e-5f);

  auto q = Tensor::scalar(0.f, true);
  Adam opt2({q}, lr);
  q.grad().assign(1, -5.f);
  opt2.step();
  CHECK(std::abs(q.data()[0] - lr) < 1e-5f);
}

TEST_CASE("adam is deterministic over repeated runs") {
  auto run = [] {
    auto p = Tensor::from_data({4}, {0.1f, 0.2f, -0.3f, 0.4f}, true);
    Adam opt({p}, 1e-3f);
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
      p.grad().assign(4, 0.f);
      for (auto& g : p.grad()) g = static_cast<float>(rng.normal());
      opt.step();
    }
    return p.data();
  };
  CHECK(run() == run());
}

TEST_CASE("adam rejects non-positive learning rate") {
  auto p = Tensor::scalar(0.f, true);
  CHECK_THROWS_AS(Adam({p}, 0.f), ValueError);
  CHECK_THROWS_AS(Adam({p}, -1.f), ValueError);
}

TEST_CASE("logsumexp and softmax basics") {
  auto x = Tensor::from_data({3}, {1.f, 2.f, 3.f});
  const float lse = logsumexp(x).item();
  CHECK(lse == doctest::Approx(std::log(std::exp(1.f) + std::exp(2.f) + std::exp(3.f))));
  auto sm = softmax(x);
  float sum = 0;
  for (float v : sm.data()) sum += v;
  CHECK(sum == doctest::Approx(1.f));
}

TEST_CASE("slicing, concatenation and stacking round out") {
  auto a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  auto b = Tensor::from_data({2, 1}, {5, 6});
  auto c = concat_last(std::vector<Tensor>{a, b});
  CHECK(c.shape() == Shape{2, 3});
  CHECK(c.data() == std::vector<float>{1, 2, 5, 3, 4, 6});
  auto s = slice_last(c, 2, 1);
  CHECK(s.data() == std::vector<float>{5, 6});
  auto r = row(c, 1);
  CHECK(r.data() == std::vector<float>{3, 4, 6});
  auto rs = rows(c, 0, 2);
  CHECK(rs.data() == c.data());
  auto st = stack_rows(std::vector<Tensor>{r, r});
  CHECK(st.shape() == Shape{2, 3});
}

TEST_CASE("cosine rejects zero-norm input") {
  auto a = Tensor::from_data({2}, {0.f, 0.f});
  auto b = Tensor::from_data({2}, {1.f, 0.f});
  CHECK_THROWS_AS(cosine(a, b), ValueError);
}
