#include "nowcast/nn/layers.hpp"

#include "nowcast/nn/adam.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nowcast;
using namespace nowcast::nn;

namespace {

Tensor random_tensor(std::vector<Index> shape, std::uint64_t seed,
                     float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  for (Index i = 0; i < t.numel(); ++i) t[i] = u(rng);
  return t;
}

double weighted_loss(const Tensor& y, const Tensor& w) {
  double acc = 0.0;
  for (Index i = 0; i < y.numel(); ++i)
    acc += static_cast<double>(y[i]) * static_cast<double>(w[i]);
  return acc;
}

/// Central-difference check of input and parameter gradients against the
/// layer's backward pass, on a random subsample of coordinates.
void check_layer_gradients(Layer& layer, const Tensor& x, float eps = 1e-2f,
                           double tol = 4e-2) {
  Tensor input = x;
  Tensor y = layer.forward(input, /*training=*/true);
  const Tensor w = random_tensor(y.shape(), 999);

  std::vector<Param*> params;
  layer.collect_params(params);
  for (Param* p : params) p->zero_grad();
  const Tensor gx = layer.backward(w);
  REQUIRE(gx.shape() == x.shape());

  std::mt19937_64 pick(1234);
  auto fd_check = [&](float* slot, double analytic) {
    const float saved = *slot;
    *slot = saved + eps;
    const double up = weighted_loss(layer.forward(input, true), w);
    *slot = saved - eps;
    const double dn = weighted_loss(layer.forward(input, true), w);
    *slot = saved;
    const double numeric = (up - dn) / (2.0 * eps);
    const double scale = std::max({1.0, std::abs(numeric), std::abs(analytic)});
    CHECK(std::abs(numeric - analytic) / scale < tol);
  };

  for (int k = 0; k < 10; ++k) {
    const Index i = static_cast<Index>(pick() % static_cast<std::uint64_t>(x.numel()));
    fd_check(input.data() + i, static_cast<double>(gx[i]));
  }
  for (Param* p : params) {
    for (int k = 0; k < 6; ++k) {
      const Index i =
          static_cast<Index>(pick() % static_cast<std::uint64_t>(p->value.numel()));
      fd_check(p->value.data() + i, static_cast<double>(p->grad[i]));
    }
  }
  layer.forward(input, true);  // leave the layer's caches consistent
}

}  // namespace

TEST_CASE("initialization is deterministic in the seed") {
  InitRng a(7), b(7), c(8);
  Tensor ta({32}), tb({32}), tc({32});
  a.fan_in_uniform(ta, 16);
  b.fan_in_uniform(tb, 16);
  c.fan_in_uniform(tc, 16);
  CHECK((ta.flat() == tb.flat()).all());
  CHECK(!(ta.flat() == tc.flat()).all());
  CHECK(ta.flat().abs().maxCoeff() <= 1.0f / 4.0f);  // 1/sqrt(16)
}

TEST_CASE("relu forward and backward") {
  ReLU relu;
  Tensor x({4});
  x[0] = -2.0f; x[1] = -0.5f; x[2] = 0.5f; x[3] = 2.0f;
  const Tensor y = relu.forward(x, true);
  CHECK(y[0] == 0.0f);
  CHECK(y[3] == 2.0f);
  Tensor g({4});
  g.flat().setConstant(1.0f);
  const Tensor gx = relu.backward(g);
  CHECK(gx[0] == 0.0f);
  CHECK(gx[2] == 1.0f);
}

TEST_CASE("pointwise conv gradients") {
  InitRng rng(1);
  PointwiseConv conv(3, 5, true, rng);
  check_layer_gradients(conv, random_tensor({2, 3, 4, 4}, 10));
}

TEST_CASE("depthwise conv2d gradients") {
  InitRng rng(2);
  DepthwiseConv2d conv(3, 2, rng);
  check_layer_gradients(conv, random_tensor({2, 3, 6, 6}, 11));
}

TEST_CASE("generic conv2d gradients") {
  InitRng rng(3);
  Conv2d conv(2, 1, 7, rng);
  check_layer_gradients(conv, random_tensor({2, 2, 8, 8}, 12));
}

TEST_CASE("batch norm normalizes and checks gradients") {
  InitRng rng(4);
  BatchNorm bn(3);
  const Tensor x = random_tensor({4, 3, 5, 5}, 13, -2.0f, 3.0f);
  const Tensor y = bn.forward(x, true);
  // per-channel mean ~0 and variance ~1 in training mode
  for (Index c = 0; c < 3; ++c) {
    double sum = 0.0, sum2 = 0.0;
    Index n = 0;
    for (Index b = 0; b < 4; ++b)
      for (Index i = 0; i < 25; ++i) {
        const float v = y[(b * 3 + c) * 25 + i];
        sum += v;
        sum2 += v * v;
        ++n;
      }
    CHECK(std::abs(sum / n) < 1e-5);
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(1e-3));
  }
  BatchNorm bn2(3);
  check_layer_gradients(bn2, random_tensor({4, 3, 5, 5}, 14));
}

TEST_CASE("max pool forward known values and gradients") {
  MaxPool2d pool;
  Tensor x({1, 1, 4, 4});
  for (Index i = 0; i < 16; ++i) x[i] = static_cast<float>(i);
  const Tensor y = pool.forward(x, true);
  REQUIRE(y.shape() == std::vector<Index>{1, 1, 2, 2});
  CHECK(y[0] == 5.0f);
  CHECK(y[3] == 15.0f);
  Tensor g({1, 1, 2, 2});
  g.flat().setConstant(1.0f);
  const Tensor gx = pool.backward(g);
  CHECK(gx[5] == 1.0f);
  CHECK(gx[0] == 0.0f);

  MaxPool2d pool2;
  check_layer_gradients(pool2, random_tensor({2, 3, 6, 6}, 15), 1e-3f);
}

TEST_CASE("bilinear upsample matches align-corners interpolation") {
  BilinearUpsample2d up;
  Tensor x({1, 1, 2, 2});
  x[0] = 0.0f; x[1] = 3.0f; x[2] = 6.0f; x[3] = 9.0f;
  const Tensor y = up.forward(x, true);
  REQUIRE(y.shape() == std::vector<Index>{1, 1, 4, 4});
  // bilinear surface f(y,x) = 3x + 6y sampled at {0, 1/3, 2/3, 1}
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      CHECK(y[i * 4 + j] ==
            doctest::Approx(static_cast<double>(j) + 2.0 * static_cast<double>(i))
                .epsilon(1e-6));

  BilinearUpsample2d up2;
  check_layer_gradients(up2, random_tensor({2, 3, 4, 4}, 16));
}

TEST_CASE("channel attention gradients") {
  InitRng rng(5);
  ChannelAttention att(4, 2, rng);
  check_layer_gradients(att, random_tensor({2, 4, 5, 5}, 17), 1e-3f);
}

TEST_CASE("spatial attention gradients") {
  InitRng rng(6);
  SpatialAttention att(rng);
  check_layer_gradients(att, random_tensor({2, 3, 8, 8}, 18), 1e-3f);
}

TEST_CASE("cbam gradients") {
  InitRng rng(7);
  CBAM cbam(4, 2, rng);
  check_layer_gradients(cbam, random_tensor({2, 4, 6, 6}, 19), 1e-3f);
}

TEST_CASE("depthwise conv3d gradients") {
  InitRng rng(8);
  DepthwiseConv3d conv(2, 2, rng);
  check_layer_gradients(conv, random_tensor({2, 2, 3, 4, 4}, 20));
}

TEST_CASE("adaptive max pool 3d uses the floor/ceil window rule") {
  AdaptiveMaxPool3d pool(1, 4, 4);
  Tensor x({1, 1, 22, 8, 12});
  for (Index i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(i);
  const Tensor y = pool.forward(x, true);
  REQUIRE(y.shape() == std::vector<Index>{1, 1, 1, 4, 4});
  // increasing values: each window's max is its last element
  // window(i,j): d = 21, h in [2i, 2i+2), w in [3j, 3j+3)
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) {
      const Index expect = (21 * 8 + (2 * i + 1)) * 12 + (3 * j + 2);
      CHECK(y[i * 4 + j] == static_cast<float>(expect));
    }

  AdaptiveMaxPool3d pool2(1, 4, 4);
  check_layer_gradients(pool2, random_tensor({2, 2, 5, 6, 6}, 21), 1e-3f);
}

// With freshly initialized BN (beta = 0), windows zeroed by an internal
// ReLU all map to one shared post-BN value sitting exactly at the next
// ReLU's kink, which wrecks finite differences. Shifting beta moves that
// point mass away from the kink without changing what is being verified.
static void shift_bn_betas(Layer& layer) {
  std::vector<Param*> params;
  layer.collect_params(params);
  for (Param* p : params)
    if (p->name == "bn.beta") p->value.flat().setConstant(0.5f);
}

TEST_CASE("separable blocks and double conv gradients") {
  InitRng rng(9);
  SeparableConvBlock block(3, 4, 2, rng);
  shift_bn_betas(block);
  check_layer_gradients(block, random_tensor({2, 3, 5, 5}, 22), 1e-3f, 6e-2);

  InitRng rng2(10);
  DoubleConvDS dc(3, 4, 5, 2, rng2);
  shift_bn_betas(dc);
  check_layer_gradients(dc, random_tensor({2, 3, 5, 5}, 23), 1e-3f, 6e-2);

  InitRng rng3(11);
  SeparableConvBlock3d b3(2, 3, 2, rng3);
  shift_bn_betas(b3);
  check_layer_gradients(b3, random_tensor({2, 2, 3, 4, 4}, 24), 1e-3f, 6e-2);
}

TEST_CASE("channel concat and split are inverse") {
  const Tensor a = random_tensor({2, 3, 4, 4}, 25);
  const Tensor b = random_tensor({2, 5, 4, 4}, 26);
  const Tensor cat = concat_channels(a, b);
  REQUIRE(cat.shape() == std::vector<Index>{2, 8, 4, 4});
  Tensor ga, gb;
  split_channels(cat, 3, ga, gb);
  CHECK((ga.flat() == a.flat()).all());
  CHECK((gb.flat() == b.flat()).all());
}

TEST_CASE("mse loss value and gradient") {
  Tensor pred({2, 2}), target({2, 2});
  pred[0] = 1.0f; pred[1] = 2.0f; pred[2] = 3.0f; pred[3] = 4.0f;
  target.flat().setConstant(2.0f);
  Tensor grad;
  const double loss = mse_loss(pred, target, &grad);
  CHECK(loss == doctest::Approx((1.0 + 0.0 + 1.0 + 4.0) / 4.0));
  CHECK(grad[0] == doctest::Approx(2.0 * (1.0 - 2.0) / 4.0));
  CHECK(grad[3] == doctest::Approx(2.0 * (4.0 - 2.0) / 4.0));
}

TEST_CASE("adam takes a bias-corrected first step of size lr") {
  Param p;
  p.value = Tensor({2});
  p.grad = Tensor({2});
  p.value.flat().setConstant(1.0f);
  p.name = "w";
  Adam opt({&p}, 0.1);
  p.grad[0] = 0.5f;
  p.grad[1] = -2.0f;
  opt.step();
  // bias-corrected first step moves each weight by ~lr against the gradient sign
  CHECK(p.value[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-3));
  CHECK(p.value[1] == doctest::Approx(1.0 + 0.1).epsilon(1e-3));
  CHECK(opt.step_count() == 1);
}
