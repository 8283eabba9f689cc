#include "nowcast/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nowcast::nn {

namespace {

using Plane = Eigen::Map<MatrixXfRM>;
using ConstPlane = Eigen::Map<const MatrixXfRM>;

Index inner_size(const Tensor& t) {
  Index n = 1;
  for (size_t i = 2; i < t.ndim(); ++i) n *= t.dim(i);
  return n;
}

}  // namespace

void InitRng::uniform(Tensor& t, float lo, float hi) {
  std::uniform_real_distribution<float> dist(lo, hi);
  for (Index i = 0; i < t.numel(); ++i) t[i] = dist(rng_);
}

void InitRng::fan_in_uniform(Tensor& t, Index fan_in) {
  float bound = 1.0f / std::sqrt(static_cast<float>(std::max<Index>(1, fan_in)));
  uniform(t, -bound, bound);
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x, bool) {
  Tensor y = x;
  mask_ = Tensor(x.shape());
  for (Index i = 0; i < x.numel(); ++i) {
    bool pos = x[i] > 0.0f;
    mask_[i] = pos ? 1.0f : 0.0f;
    if (!pos) y[i] = 0.0f;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& gy) {
  Tensor gx = gy;
  gx.flat() *= mask_.flat();
  return gx;
}

// ------------------------------------------------------ DepthwiseConv2d

DepthwiseConv2d::DepthwiseConv2d(Index channels, Index multiplier, InitRng& init)
    : channels_(channels), mult_(multiplier) {
  weight_.value = Tensor({channels_ * mult_, 3, 3});
  weight_.grad = Tensor(weight_.value.shape());
  weight_.name = "dw2d.weight";
  bias_.value = Tensor({channels_ * mult_});
  bias_.grad = Tensor(bias_.value.shape());
  bias_.name = "dw2d.bias";
  init.fan_in_uniform(weight_.value, 9);
  init.fan_in_uniform(bias_.value, 9);
}

void DepthwiseConv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Tensor DepthwiseConv2d::forward(const Tensor& x, bool) {
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (C != channels_) throw std::invalid_argument("DepthwiseConv2d: channel mismatch");
  input_ = x;
  Tensor y({B, C * mult_, H, W});
  for (Index n = 0; n < B; ++n) {
    for (Index c = 0; c < C; ++c) {
      ConstPlane in(x.data() + ((n * C + c) * H) * W, H, W);
      for (Index k = 0; k < mult_; ++k) {
        const Index co = c * mult_ + k;
        Plane out(y.data() + ((n * C * mult_ + co) * H) * W, H, W);
        const float* w = weight_.value.data() + co * 9;
        out.setConstant(bias_.value[co]);
        for (int dy = -1; dy <= 1; ++dy) {
          const Index y0 = std::max<Index>(0, -dy), h = H - std::abs(dy);
          for (int dx = -1; dx <= 1; ++dx) {
            const Index x0 = std::max<Index>(0, -dx), w2 = W - std::abs(dx);
            out.block(y0, x0, h, w2) +=
                w[(dy + 1) * 3 + (dx + 1)] * in.block(y0 + dy, x0 + dx, h, w2);
          }
        }
      }
    }
  }
  return y;
}

Tensor DepthwiseConv2d::backward(const Tensor& gy) {
  const Index B = input_.dim(0), C = channels_, H = input_.dim(2), W = input_.dim(3);
  Tensor gx(input_.shape());
  for (Index n = 0; n < B; ++n) {
    for (Index c = 0; c < C; ++c) {
      ConstPlane in(input_.data() + ((n * C + c) * H) * W, H, W);
      Plane gin(gx.data() + ((n * C + c) * H) * W, H, W);
      for (Index k = 0; k < mult_; ++k) {
        const Index co = c * mult_ + k;
        ConstPlane g(gy.data() + ((n * C * mult_ + co) * H) * W, H, W);
        const float* w = weight_.value.data() + co * 9;
        float* dw = weight_.grad.data() + co * 9;
        bias_.grad[co] += g.sum();
        for (int dy = -1; dy <= 1; ++dy) {
          const Index y0 = std::max<Index>(0, -dy), h = H - std::abs(dy);
          for (int dx = -1; dx <= 1; ++dx) {
            const Index x0 = std::max<Index>(0, -dx), w2 = W - std::abs(dx);
            gin.block(y0 + dy, x0 + dx, h, w2) +=
                w[(dy + 1) * 3 + (dx + 1)] * g.block(y0, x0, h, w2);
            dw[(dy + 1) * 3 + (dx + 1)] +=
                (g.block(y0, x0, h, w2).array() *
                 in.block(y0 + dy, x0 + dx, h, w2).array())
                    .sum();
          }
        }
      }
    }
  }
  return gx;
}

// -------------------------------------------------------- PointwiseConv

PointwiseConv::PointwiseConv(Index in_ch, Index out_ch, bool bias, InitRng& init)
    : in_ch_(in_ch), out_ch_(out_ch), has_bias_(bias) {
  weight_.value = Tensor({out_ch_, in_ch_});
  weight_.grad = Tensor(weight_.value.shape());
  weight_.name = "pw.weight";
  init.fan_in_uniform(weight_.value, in_ch_);
  if (has_bias_) {
    bias_.value = Tensor({out_ch_});
    bias_.grad = Tensor(bias_.value.shape());
    bias_.name = "pw.bias";
    init.fan_in_uniform(bias_.value, in_ch_);
  }
}

void PointwiseConv::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

Tensor PointwiseConv::forward(const Tensor& x, bool) {
  const Index B = x.dim(0), C = x.dim(1), inner = inner_size(x);
  if (C != in_ch_) throw std::invalid_argument("PointwiseConv: channel mismatch");
  input_ = x;
  std::vector<Index> out_shape = x.shape();
  out_shape[1] = out_ch_;
  Tensor y(out_shape);
  auto W = weight_.value.mat(out_ch_, in_ch_);
  for (Index n = 0; n < B; ++n) {
    auto X = x.sample(n, in_ch_, inner);
    auto Y = y.sample(n, out_ch_, inner);
    Y.noalias() = W * X;
    if (has_bias_)
      Y.colwise() += Eigen::Map<const Eigen::VectorXf>(bias_.value.data(), out_ch_);
  }
  return y;
}

Tensor PointwiseConv::backward(const Tensor& gy) {
  const Index B = input_.dim(0), inner = inner_size(input_);
  Tensor gx(input_.shape());
  auto W = weight_.value.mat(out_ch_, in_ch_);
  auto dW = weight_.grad.mat(out_ch_, in_ch_);
  for (Index n = 0; n < B; ++n) {
    auto X = input_.sample(n, in_ch_, inner);
    auto G = gy.sample(n, out_ch_, inner);
    gx.sample(n, in_ch_, inner).noalias() = W.transpose() * G;
    dW.noalias() += G * X.transpose();
    if (has_bias_)
      Eigen::Map<Eigen::VectorXf>(bias_.grad.data(), out_ch_) += G.rowwise().sum();
  }
  return gx;
}

// --------------------------------------------------------------- Conv2d

Conv2d::Conv2d(Index in_ch, Index out_ch, Index kernel, InitRng& init)
    : in_ch_(in_ch), out_ch_(out_ch), k_(kernel) {
  if (k_ % 2 == 0) throw std::invalid_argument("Conv2d: even kernel");
  weight_.value = Tensor({out_ch_, in_ch_, k_, k_});
  weight_.grad = Tensor(weight_.value.shape());
  weight_.name = "conv2d.weight";
  bias_.value = Tensor({out_ch_});
  bias_.grad = Tensor(bias_.value.shape());
  bias_.name = "conv2d.bias";
  init.fan_in_uniform(weight_.value, in_ch_ * k_ * k_);
  init.fan_in_uniform(bias_.value, in_ch_ * k_ * k_);
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (C != in_ch_) throw std::invalid_argument("Conv2d: channel mismatch");
  input_ = x;
  Tensor y({B, out_ch_, H, W});
  const Index r = k_ / 2;
  for (Index n = 0; n < B; ++n) {
    for (Index o = 0; o < out_ch_; ++o) {
      Plane out(y.data() + ((n * out_ch_ + o) * H) * W, H, W);
      out.setConstant(bias_.value[o]);
      for (Index i = 0; i < in_ch_; ++i) {
        ConstPlane in(x.data() + ((n * C + i) * H) * W, H, W);
        const float* w = weight_.value.data() + (o * in_ch_ + i) * k_ * k_;
        for (Index dy = -r; dy <= r; ++dy) {
          const Index y0 = std::max<Index>(0, -dy), h = H - std::abs(dy);
          for (Index dx = -r; dx <= r; ++dx) {
            const Index x0 = std::max<Index>(0, -dx), w2 = W - std::abs(dx);
            out.block(y0, x0, h, w2) +=
                w[(dy + r) * k_ + (dx + r)] * in.block(y0 + dy, x0 + dx, h, w2);
          }
        }
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  const Index B = input_.dim(0), H = input_.dim(2), W = input_.dim(3);
  Tensor gx(input_.shape());
  const Index r = k_ / 2;
  for (Index n = 0; n < B; ++n) {
    for (Index o = 0; o < out_ch_; ++o) {
      ConstPlane g(gy.data() + ((n * out_ch_ + o) * H) * W, H, W);
      bias_.grad[o] += g.sum();
      for (Index i = 0; i < in_ch_; ++i) {
        ConstPlane in(input_.data() + ((n * in_ch_ + i) * H) * W, H, W);
        Plane gin(gx.data() + ((n * in_ch_ + i) * H) * W, H, W);
        const float* w = weight_.value.data() + (o * in_ch_ + i) * k_ * k_;
        float* dw = weight_.grad.data() + (o * in_ch_ + i) * k_ * k_;
        for (Index dy = -r; dy <= r; ++dy) {
          const Index y0 = std::max<Index>(0, -dy), h = H - std::abs(dy);
          for (Index dx = -r; dx <= r; ++dx) {
            const Index x0 = std::max<Index>(0, -dx), w2 = W - std::abs(dx);
            gin.block(y0 + dy, x0 + dx, h, w2) +=
                w[(dy + r) * k_ + (dx + r)] * g.block(y0, x0, h, w2);
            dw[(dy + r) * k_ + (dx + r)] +=
                (g.block(y0, x0, h, w2).array() *
                 in.block(y0 + dy, x0 + dx, h, w2).array())
                    .sum();
          }
        }
      }
    }
  }
  return gx;
}

// ------------------------------------------------------------ BatchNorm

BatchNorm::BatchNorm(Index channels, double eps, double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum) {
  gamma_.value = Tensor::full({channels_}, 1.0f);
  gamma_.grad = Tensor({channels_});
  gamma_.name = "bn.gamma";
  beta_.value = Tensor({channels_});
  beta_.grad = Tensor({channels_});
  beta_.name = "bn.beta";
  running_mean_.value = Tensor({channels_});
  running_mean_.name = "bn.running_mean";
  running_var_.value = Tensor::full({channels_}, 1.0f);
  running_var_.name = "bn.running_var";
}

void BatchNorm::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm::collect_buffers(std::vector<Param*>& out) {
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
  const Index B = x.dim(0), C = x.dim(1), inner = inner_size(x);
  if (C != channels_) throw std::invalid_argument("BatchNorm: channel mismatch");
  batch_ = B;
  inner_ = inner;
  Tensor y(x.shape());
  xhat_ = Tensor(x.shape());
  inv_std_.assign(static_cast<size_t>(C), 0.0f);
  const double n = static_cast<double>(B) * inner;

  for (Index c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double s = 0.0, s2 = 0.0;
      for (Index b = 0; b < B; ++b) {
        const float* p = x.data() + (b * C + c) * inner;
        for (Index i = 0; i < inner; ++i) {
          s += p[i];
          s2 += static_cast<double>(p[i]) * p[i];
        }
      }
      mean = s / n;
      var = std::max(0.0, s2 / n - mean * mean);
      double unbiased = n > 1 ? var * n / (n - 1) : var;
      running_mean_.value[c] = static_cast<float>(
          (1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean);
      running_var_.value[c] = static_cast<float>(
          (1.0 - momentum_) * running_var_.value[c] + momentum_ * unbiased);
    } else {
      mean = running_mean_.value[c];
      var = running_var_.value[c];
    }
    const float istd = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[static_cast<size_t>(c)] = istd;
    const float m = static_cast<float>(mean);
    const float g = gamma_.value[c], be = beta_.value[c];
    for (Index b = 0; b < B; ++b) {
      const float* p = x.data() + (b * C + c) * inner;
      float* xh = xhat_.data() + (b * C + c) * inner;
      float* yo = y.data() + (b * C + c) * inner;
      for (Index i = 0; i < inner; ++i) {
        xh[i] = (p[i] - m) * istd;
        yo[i] = g * xh[i] + be;
      }
    }
  }
  training_mode_ = training;
  return y;
}

Tensor BatchNorm::backward(const Tensor& gy) {
  const Index B = batch_, C = channels_, inner = inner_;
  Tensor gx(gy.shape());
  const double n = static_cast<double>(B) * inner;
  for (Index c = 0; c < C; ++c) {
    double s1 = 0.0, s2 = 0.0;
    for (Index b = 0; b < B; ++b) {
      const float* g = gy.data() + (b * C + c) * inner;
      const float* xh = xhat_.data() + (b * C + c) * inner;
      for (Index i = 0; i < inner; ++i) {
        s1 += g[i];
        s2 += static_cast<double>(g[i]) * xh[i];
      }
    }
    gamma_.grad[c] += static_cast<float>(s2);
    beta_.grad[c] += static_cast<float>(s1);
    const float k = gamma_.value[c] * inv_std_[static_cast<size_t>(c)];
    const float m1 = static_cast<float>(s1 / n), m2 = static_cast<float>(s2 / n);
    for (Index b = 0; b < B; ++b) {
      const float* g = gy.data() + (b * C + c) * inner;
      const float* xh = xhat_.data() + (b * C + c) * inner;
      float* gx_p = gx.data() + (b * C + c) * inner;
      if (training_mode_)
        for (Index i = 0; i < inner; ++i)
          gx_p[i] = k * (g[i] - m1 - xh[i] * m2);
      else
        for (Index i = 0; i < inner; ++i) gx_p[i] = k * g[i];
    }
  }
  return gx;
}

// ------------------------------------------------------------ MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 || W % 2) throw std::invalid_argument("MaxPool2d: odd spatial size");
  in_shape_ = x.shape();
  const Index Ho = H / 2, Wo = W / 2;
  Tensor y({B, C, Ho, Wo});
  argmax_.assign(static_cast<size_t>(y.numel()), 0);
  for (Index n = 0; n < B * C; ++n) {
    const float* in = x.data() + n * H * W;
    float* out = y.data() + n * Ho * Wo;
    Index* am = argmax_.data() + n * Ho * Wo;
    for (Index i = 0; i < Ho; ++i) {
      for (Index j = 0; j < Wo; ++j) {
        Index base = (2 * i) * W + 2 * j;
        Index best = base;
        float bv = in[base];
        for (Index dy = 0; dy < 2; ++dy)
          for (Index dx = 0; dx < 2; ++dx) {
            Index idx = base + dy * W + dx;
            if (in[idx] > bv) {
              bv = in[idx];
              best = idx;
            }
          }
        out[i * Wo + j] = bv;
        am[i * Wo + j] = n * H * W + best;
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& gy) {
  Tensor gx(in_shape_);
  for (Index i = 0; i < gy.numel(); ++i)
    gx[argmax_[static_cast<size_t>(i)]] += gy[i];
  return gx;
}

// --------------------------------------------------- BilinearUpsample2d

Tensor BilinearUpsample2d::forward(const Tensor& x, bool) {
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  in_shape_ = x.shape();
  const Index Ho = 2 * H, Wo = 2 * W;
  Tensor y({B, C, Ho, Wo});
  // align_corners: src = i * (in-1) / (out-1)
  const double sy = Ho > 1 ? static_cast<double>(H - 1) / (Ho - 1) : 0.0;
  const double sx = Wo > 1 ? static_cast<double>(W - 1) / (Wo - 1) : 0.0;
  for (Index n = 0; n < B * C; ++n) {
    const float* in = x.data() + n * H * W;
    float* out = y.data() + n * Ho * Wo;
    for (Index i = 0; i < Ho; ++i) {
      const double fy = i * sy;
      const Index y0 = std::min<Index>(static_cast<Index>(fy), H - 1);
      const Index y1 = std::min<Index>(y0 + 1, H - 1);
      const float wy = static_cast<float>(fy - y0);
      for (Index j = 0; j < Wo; ++j) {
        const double fx = j * sx;
        const Index x0 = std::min<Index>(static_cast<Index>(fx), W - 1);
        const Index x1 = std::min<Index>(x0 + 1, W - 1);
        const float wx = static_cast<float>(fx - x0);
        out[i * Wo + j] = (1 - wy) * ((1 - wx) * in[y0 * W + x0] + wx * in[y0 * W + x1]) +
                          wy * ((1 - wx) * in[y1 * W + x0] + wx * in[y1 * W + x1]);
      }
    }
  }
  return y;
}

Tensor BilinearUpsample2d::backward(const Tensor& gy) {
  const Index B = in_shape_[0], C = in_shape_[1], H = in_shape_[2], W = in_shape_[3];
  const Index Ho = 2 * H, Wo = 2 * W;
  Tensor gx(in_shape_);
  const double sy = Ho > 1 ? static_cast<double>(H - 1) / (Ho - 1) : 0.0;
  const double sx = Wo > 1 ? static_cast<double>(W - 1) / (Wo - 1) : 0.0;
  for (Index n = 0; n < B * C; ++n) {
    const float* g = gy.data() + n * Ho * Wo;
    float* gi = gx.data() + n * H * W;
    for (Index i = 0; i < Ho; ++i) {
      const double fy = i * sy;
      const Index y0 = std::min<Index>(static_cast<Index>(fy), H - 1);
      const Index y1 = std::min<Index>(y0 + 1, H - 1);
      const float wy = static_cast<float>(fy - y0);
      for (Index j = 0; j < Wo; ++j) {
        const double fx = j * sx;
        const Index x0 = std::min<Index>(static_cast<Index>(fx), W - 1);
        const Index x1 = std::min<Index>(x0 + 1, W - 1);
        const float wx = static_cast<float>(fx - x0);
        const float v = g[i * Wo + j];
        gi[y0 * W + x0] += (1 - wy) * (1 - wx) * v;
        gi[y0 * W + x1] += (1 - wy) * wx * v;
        gi[y1 * W + x0] += wy * (1 - wx) * v;
        gi[y1 * W + x1] += wy * wx * v;
      }
    }
  }
  return gx;
}

// ----------------------------------------------------- ChannelAttention

ChannelAttention::ChannelAttention(Index channels, Index reduction, InitRng& init)
    : channels_(channels), mid_(std::max<Index>(1, channels / reduction)) {
  w1_.value = Tensor({mid_, channels_});
  w1_.grad = Tensor(w1_.value.shape());
  w1_.name = "ca.w1";
  w2_.value = Tensor({channels_, mid_});
  w2_.grad = Tensor(w2_.value.shape());
  w2_.name = "ca.w2";
  init.fan_in_uniform(w1_.value, channels_);
  init.fan_in_uniform(w2_.value, mid_);
}

void ChannelAttention::collect_params(std::vector<Param*>& out) {
  out.push_back(&w1_);
  out.push_back(&w2_);
}

Tensor ChannelAttention::forward(const Tensor& x, bool) {
  const Index B = x.dim(0), C = x.dim(1), inner = inner_size(x);
  if (C != channels_) throw std::invalid_argument("ChannelAttention: channel mismatch");
  input_ = x;
  avg_ = Tensor({B, C});
  mx_ = Tensor({B, C});
  h1a_ = Tensor({B, mid_});
  h1m_ = Tensor({B, mid_});
  scale_ = Tensor({B, C});
  argmax_.assign(static_cast<size_t>(B * C), 0);

  auto W1 = w1_.value.mat(mid_, channels_);
  auto W2 = w2_.value.mat(channels_, mid_);
  Tensor y(x.shape());
  for (Index n = 0; n < B; ++n) {
    auto X = x.sample(n, C, inner);
    for (Index c = 0; c < C; ++c) {
      const float* p = x.data() + (n * C + c) * inner;
      float best = p[0];
      Index bi = 0;
      double s = 0.0;
      for (Index i = 0; i < inner; ++i) {
        s += p[i];
        if (p[i] > best) {
          best = p[i];
          bi = i;
        }
      }
      avg_[n * C + c] = static_cast<float>(s / inner);
      mx_[n * C + c] = best;
      argmax_[static_cast<size_t>(n * C + c)] = bi;
    }
    Eigen::Map<Eigen::VectorXf> a(avg_.data() + n * C, C);
    Eigen::Map<Eigen::VectorXf> m(mx_.data() + n * C, C);
    Eigen::Map<Eigen::VectorXf> ha(h1a_.data() + n * mid_, mid_);
    Eigen::Map<Eigen::VectorXf> hm(h1m_.data() + n * mid_, mid_);
    ha.noalias() = W1 * a;
    hm.noalias() = W1 * m;
    ha = ha.cwiseMax(0.0f);
    hm = hm.cwiseMax(0.0f);
    Eigen::VectorXf z = W2 * ha + W2 * hm;
    for (Index c = 0; c < C; ++c)
      scale_[n * C + c] = 1.0f / (1.0f + std::exp(-z(c)));
    auto Y = y.sample(n, C, inner);
    Y = X.array().colwise() *
        Eigen::Map<const Eigen::ArrayXf>(scale_.data() + n * C, C);
  }
  return y;
}

Tensor ChannelAttention::backward(const Tensor& gy) {
  const Index B = input_.dim(0), C = channels_, inner = inner_size(input_);
  Tensor gx(input_.shape());
  auto W1 = w1_.value.mat(mid_, channels_);
  auto W2 = w2_.value.mat(channels_, mid_);
  auto dW1 = w1_.grad.mat(mid_, channels_);
  auto dW2 = w2_.grad.mat(channels_, mid_);

  for (Index n = 0; n < B; ++n) {
    auto X = input_.sample(n, C, inner);
    auto G = gy.sample(n, C, inner);
    Eigen::Map<const Eigen::ArrayXf> s(scale_.data() + n * C, C);

    // gradient through the rescale
    gx.sample(n, C, inner) = G.array().colwise() * s;
    Eigen::VectorXf ds = (G.array() * X.array()).rowwise().sum().matrix();
    Eigen::VectorXf dz = ds.array() * s * (1.0f - s);

    Eigen::Map<const Eigen::VectorXf> a(avg_.data() + n * C, C);
    Eigen::Map<const Eigen::VectorXf> m(mx_.data() + n * C, C);
    Eigen::Map<const Eigen::VectorXf> ha(h1a_.data() + n * mid_, mid_);
    Eigen::Map<const Eigen::VectorXf> hm(h1m_.data() + n * mid_, mid_);

    dW2.noalias() += dz * (ha + hm).transpose();
    Eigen::VectorXf dha = W2.transpose() * dz;
    Eigen::VectorXf dhm = dha;
    for (Index i = 0; i < mid_; ++i) {
      if (ha(i) <= 0.0f) dha(i) = 0.0f;
      if (hm(i) <= 0.0f) dhm(i) = 0.0f;
    }
    dW1.noalias() += dha * a.transpose() + dhm * m.transpose();
    Eigen::VectorXf da = W1.transpose() * dha;
    Eigen::VectorXf dm = W1.transpose() * dhm;

    auto GX = gx.sample(n, C, inner);
    for (Index c = 0; c < C; ++c) {
      const float spread = da(c) / static_cast<float>(inner);
      float* row = gx.data() + (n * C + c) * inner;
      for (Index i = 0; i < inner; ++i) row[i] += spread;
      row[argmax_[static_cast<size_t>(n * C + c)]] += dm(c);
    }
    (void)GX;
  }
  return gx;
}

// ----------------------------------------------------- SpatialAttention

SpatialAttention::SpatialAttention(InitRng& init, Index kernel)
    : conv_(2, 1, kernel, init) {}

void SpatialAttention::collect_params(std::vector<Param*>& out) {
  conv_.collect_params(out);
}

Tensor SpatialAttention::forward(const Tensor& x, bool training) {
  const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  input_ = x;
  stacked_ = Tensor({B, 2, H, W});
  argmax_.assign(static_cast<size_t>(B * H * W), 0);
  for (Index n = 0; n < B; ++n) {
    float* avg = stacked_.data() + (n * 2) * H * W;
    float* mx = stacked_.data() + (n * 2 + 1) * H * W;
    for (Index i = 0; i < H * W; ++i) {
      double s = 0.0;
      float best = x.data()[(n * C) * H * W + i];
      Index bc = 0;
      for (Index c = 0; c < C; ++c) {
        float v = x.data()[((n * C + c) * H * W) + i];
        s += v;
        if (v > best) {
          best = v;
          bc = c;
        }
      }
      avg[i] = static_cast<float>(s / C);
      mx[i] = best;
      argmax_[static_cast<size_t>(n * H * W + i)] = bc;
    }
  }
  Tensor z = conv_.forward(stacked_, training);  // (B,1,H,W)
  scale_ = Tensor({B, H * W});
  for (Index i = 0; i < z.numel(); ++i)
    scale_[i] = 1.0f / (1.0f + std::exp(-z[i]));

  Tensor y(x.shape());
  for (Index n = 0; n < B; ++n)
    for (Index c = 0; c < C; ++c) {
      const float* p = x.data() + (n * C + c) * H * W;
      const float* s = scale_.data() + n * H * W;
      float* o = y.data() + (n * C + c) * H * W;
      for (Index i = 0; i < H * W; ++i) o[i] = p[i] * s[i];
    }
  return y;
}

Tensor SpatialAttention::backward(const Tensor& gy) {
  const Index B = input_.dim(0), C = input_.dim(1), H = input_.dim(2),
              W = input_.dim(3);
  const Index HW = H * W;
  Tensor gx(input_.shape());
  Tensor dz({B, 1, H, W});
  for (Index n = 0; n < B; ++n) {
    const float* s = scale_.data() + n * HW;
    float* dzp = dz.data() + n * HW;
    for (Index i = 0; i < HW; ++i) dzp[i] = 0.0f;
    for (Index c = 0; c < C; ++c) {
      const float* g = gy.data() + (n * C + c) * HW;
      const float* p = input_.data() + (n * C + c) * HW;
      float* gi = gx.data() + (n * C + c) * HW;
      for (Index i = 0; i < HW; ++i) {
        gi[i] = g[i] * s[i];
        dzp[i] += g[i] * p[i];  // ds
      }
    }
    for (Index i = 0; i < HW; ++i) dzp[i] *= s[i] * (1.0f - s[i]);
  }
  Tensor gstack = conv_.backward(dz);  // (B,2,H,W)
  for (Index n = 0; n < B; ++n) {
    const float* gavg = gstack.data() + (n * 2) * HW;
    const float* gmax = gstack.data() + (n * 2 + 1) * HW;
    for (Index i = 0; i < HW; ++i) {
      const float spread = gavg[i] / static_cast<float>(C);
      for (Index c = 0; c < C; ++c) gx.data()[(n * C + c) * HW + i] += spread;
      Index bc = argmax_[static_cast<size_t>(n * HW + i)];
      gx.data()[(n * C + bc) * HW + i] += gmax[i];
    }
  }
  return gx;
}

// ------------------------------------------------------------------ CBAM

CBAM::CBAM(Index channels, Index reduction, InitRng& init)
    : channel_(channels, reduction, init), spatial_(init) {}

void CBAM::collect_params(std::vector<Param*>& out) {
  channel_.collect_params(out);
  spatial_.collect_params(out);
}

Tensor CBAM::forward(const Tensor& x, bool training) {
  return spatial_.forward(channel_.forward(x, training), training);
}

Tensor CBAM::backward(const Tensor& gy) {
  return channel_.backward(spatial_.backward(gy));
}

// ------------------------------------------------------ DepthwiseConv3d

DepthwiseConv3d::DepthwiseConv3d(Index channels, Index multiplier, InitRng& init)
    : channels_(channels), mult_(multiplier) {
  weight_.value = Tensor({channels_ * mult_, 3, 3, 3});
  weight_.grad = Tensor(weight_.value.shape());
  weight_.name = "dw3d.weight";
  bias_.value = Tensor({channels_ * mult_});
  bias_.grad = Tensor(bias_.value.shape());
  bias_.name = "dw3d.bias";
  init.fan_in_uniform(weight_.value, 27);
  init.fan_in_uniform(bias_.value, 27);
}

void DepthwiseConv3d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Tensor DepthwiseConv3d::forward(const Tensor& x, bool) {
  const Index B = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
  if (C != channels_) throw std::invalid_argument("DepthwiseConv3d: channel mismatch");
  input_ = x;
  Tensor y({B, C * mult_, D, H, W});
  for (Index n = 0; n < B; ++n) {
    for (Index c = 0; c < C; ++c) {
      for (Index k = 0; k < mult_; ++k) {
        const Index co = c * mult_ + k;
        const float* w = weight_.value.data() + co * 27;
        for (Index d = 0; d < D; ++d) {
          Plane out(y.data() + (((n * C * mult_ + co) * D + d) * H) * W, H, W);
          out.setConstant(bias_.value[co]);
          for (int dz = -1; dz <= 1; ++dz) {
            const Index ds = d + dz;
            if (ds < 0 || ds >= D) continue;
            ConstPlane in(x.data() + (((n * C + c) * D + ds) * H) * W, H, W);
            for (int dy = -1; dy <= 1; ++dy) {
              const Index y0 = std::max<Index>(0, -dy), h = H - std::abs(dy);
              for (int dx = -1; dx <= 1; ++dx) {
                const Index x0 = std::max<Index>(0, -dx), w2 = W - std::abs(dx);
                out.block(y0, x0, h, w2) +=
                    w[((dz + 1) * 3 + (dy + 1)) * 3 + (dx + 1)] *
                    in.block(y0 + dy, x0 + dx, h, w2);
              }
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor DepthwiseConv3d::backward(const Tensor& gy) {
  const Index B = input_.dim(0), C = channels_, D = input_.dim(2),
              H = input_.dim(3), W = input_.dim(4);
  Tensor gx(input_.shape());
  for (Index n = 0; n < B; ++n) {
    for (Index c = 0; c < C; ++c) {
      for (Index k = 0; k < mult_; ++k) {
        const Index co = c * mult_ + k;
        const float* w = weight_.value.data() + co * 27;
        float* dw = weight_.grad.data() + co * 27;
        for (Index d = 0; d < D; ++d) {
          ConstPlane g(gy.data() + (((n * C * mult_ + co) * D + d) * H) * W, H, W);
          bias_.grad[co] += g.sum();
          for (int dz = -1; dz <= 1; ++dz) {
            const Index ds = d + dz;
            if (ds < 0 || ds >= D) continue;
            ConstPlane in(input_.data() + (((n * C + c) * D + ds) * H) * W, H, W);
            Plane gin(gx.data() + (((n * C + c) * D + ds) * H) * W, H, W);
            for (int dy = -1; dy <= 1; ++dy) {
              const Index y0 = std::max<Index>(0, -dy), h = H - std::abs(dy);
              for (int dx = -1; dx <= 1; ++dx) {
                const Index x0 = std::max<Index>(0, -dx), w2 = W - std::abs(dx);
                const Index wi = ((dz + 1) * 3 + (dy + 1)) * 3 + (dx + 1);
                gin.block(y0 + dy, x0 + dx, h, w2) += w[wi] * g.block(y0, x0, h, w2);
                dw[wi] += (g.block(y0, x0, h, w2).array() *
                           in.block(y0 + dy, x0 + dx, h, w2).array())
                              .sum();
              }
            }
          }
        }
      }
    }
  }
  return gx;
}

// --------------------------------------------------- AdaptiveMaxPool3d

AdaptiveMaxPool3d::AdaptiveMaxPool3d(Index out_d, Index out_h, Index out_w)
    : od_(out_d), oh_(out_h), ow_(out_w) {}

Tensor AdaptiveMaxPool3d::forward(const Tensor& x, bool) {
  const Index B = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
  in_shape_ = x.shape();
  Tensor y({B, C, od_, oh_, ow_});
  argmax_.assign(static_cast<size_t>(y.numel()), 0);
  auto lo = [](Index i, Index in, Index out) { return (i * in) / out; };
  auto hi = [](Index i, Index in, Index out) { return ((i + 1) * in + out - 1) / out; };
  Index oi = 0;
  for (Index n = 0; n < B * C; ++n) {
    const float* in = x.data() + n * D * H * W;
    for (Index d = 0; d < od_; ++d)
      for (Index i = 0; i < oh_; ++i)
        for (Index j = 0; j < ow_; ++j, ++oi) {
          float best = -std::numeric_limits<float>::infinity();
          Index bi = 0;
          for (Index dd = lo(d, D, od_); dd < hi(d, D, od_); ++dd)
            for (Index yy = lo(i, H, oh_); yy < hi(i, H, oh_); ++yy)
              for (Index xx = lo(j, W, ow_); xx < hi(j, W, ow_); ++xx) {
                Index idx = (dd * H + yy) * W + xx;
                if (in[idx] > best) {
                  best = in[idx];
                  bi = idx;
                }
              }
          y[oi] = best;
          argmax_[static_cast<size_t>(oi)] = n * D * H * W + bi;
        }
  }
  return y;
}

Tensor AdaptiveMaxPool3d::backward(const Tensor& gy) {
  Tensor gx(in_shape_);
  for (Index i = 0; i < gy.numel(); ++i)
    gx[argmax_[static_cast<size_t>(i)]] += gy[i];
  return gx;
}

// --------------------------------------------------- composite blocks

SeparableConvBlock::SeparableConvBlock(Index in_ch, Index out_ch,
                                       Index multiplier, InitRng& init)
    : dw_(in_ch, multiplier, init),
      pw_(in_ch * multiplier, out_ch, true, init),
      bn_(out_ch) {}

Tensor SeparableConvBlock::forward(const Tensor& x, bool training) {
  return relu_.forward(
      bn_.forward(pw_.forward(dw_.forward(x, training), training), training),
      training);
}

Tensor SeparableConvBlock::backward(const Tensor& gy) {
  return dw_.backward(pw_.backward(bn_.backward(relu_.backward(gy))));
}

void SeparableConvBlock::collect_params(std::vector<Param*>& out) {
  dw_.collect_params(out);
  pw_.collect_params(out);
  bn_.collect_params(out);
}

void SeparableConvBlock::collect_buffers(std::vector<Param*>& out) {
  bn_.collect_buffers(out);
}

DoubleConvDS::DoubleConvDS(Index in_ch, Index mid_ch, Index out_ch,
                           Index multiplier, InitRng& init)
    : a_(in_ch, mid_ch, multiplier, init), b_(mid_ch, out_ch, multiplier, init) {}

Tensor DoubleConvDS::forward(const Tensor& x, bool training) {
  return b_.forward(a_.forward(x, training), training);
}

Tensor DoubleConvDS::backward(const Tensor& gy) {
  return a_.backward(b_.backward(gy));
}

void DoubleConvDS::collect_params(std::vector<Param*>& out) {
  a_.collect_params(out);
  b_.collect_params(out);
}

void DoubleConvDS::collect_buffers(std::vector<Param*>& out) {
  a_.collect_buffers(out);
  b_.collect_buffers(out);
}

SeparableConvBlock3d::SeparableConvBlock3d(Index in_ch, Index out_ch,
                                           Index multiplier, InitRng& init)
    : dw_(in_ch, multiplier, init),
      pw_(in_ch * multiplier, out_ch, true, init),
      bn_(out_ch) {}

Tensor SeparableConvBlock3d::forward(const Tensor& x, bool training) {
  return relu_.forward(
      bn_.forward(pw_.forward(dw_.forward(x, training), training), training),
      training);
}

Tensor SeparableConvBlock3d::backward(const Tensor& gy) {
  return dw_.backward(pw_.backward(bn_.backward(relu_.backward(gy))));
}

void SeparableConvBlock3d::collect_params(std::vector<Param*>& out) {
  dw_.collect_params(out);
  pw_.collect_params(out);
  bn_.collect_params(out);
}

void SeparableConvBlock3d::collect_buffers(std::vector<Param*>& out) {
  bn_.collect_buffers(out);
}

// ------------------------------------------------------------- helpers

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.ndim() != b.ndim() || a.dim(0) != b.dim(0))
    throw std::invalid_argument("concat_channels: incompatible shapes");
  for (size_t i = 2; i < a.ndim(); ++i)
    if (a.dim(i) != b.dim(i))
      throw std::invalid_argument("concat_channels: incompatible shapes");
  const Index B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
  Index inner = 1;
  for (size_t i = 2; i < a.ndim(); ++i) inner *= a.dim(i);
  std::vector<Index> shape = a.shape();
  shape[1] = Ca + Cb;
  Tensor y(shape);
  for (Index n = 0; n < B; ++n) {
    std::copy(a.data() + n * Ca * inner, a.data() + (n + 1) * Ca * inner,
              y.data() + n * (Ca + Cb) * inner);
    std::copy(b.data() + n * Cb * inner, b.data() + (n + 1) * Cb * inner,
              y.data() + n * (Ca + Cb) * inner + Ca * inner);
  }
  return y;
}

void split_channels(const Tensor& g, Index ch_a, Tensor& ga, Tensor& gb) {
  const Index B = g.dim(0), C = g.dim(1);
  const Index Cb = C - ch_a;
  Index inner = 1;
  for (size_t i = 2; i < g.ndim(); ++i) inner *= g.dim(i);
  std::vector<Index> sa = g.shape(), sb = g.shape();
  sa[1] = ch_a;
  sb[1] = Cb;
  ga = Tensor(sa);
  gb = Tensor(sb);
  for (Index n = 0; n < B; ++n) {
    const float* src = g.data() + n * C * inner;
    std::copy(src, src + ch_a * inner, ga.data() + n * ch_a * inner);
    std::copy(src + ch_a * inner, src + C * inner, gb.data() + n * Cb * inner);
  }
}

double mse_loss(const Tensor& pred, const Tensor& target, Tensor* grad_out) {
  if (!pred.same_shape(target))
    throw std::invalid_argument("mse_loss: shape mismatch");
  const Index N = pred.numel();
  double loss = 0.0;
  if (grad_out) *grad_out = Tensor(pred.shape());
  for (Index i = 0; i < N; ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    loss += d * d;
    if (grad_out) (*grad_out)[i] = static_cast<float>(2.0 * d / N);
  }
  return loss / N;
}

}  // namespace nowcast::nn
