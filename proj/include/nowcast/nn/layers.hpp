#pragma once

#include "nowcast/tensor.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace nowcast::nn {

struct Param {
  Tensor value;
  Tensor grad;
  std::string name;

  void zero_grad() { grad.flat().setZero(); }
};

/// Deterministic parameter initialization stream.
class InitRng {
 public:
  explicit InitRng(std::uint64_t seed) : rng_(seed) {}

  /// Uniform(-bound, bound) fill with bound = 1/sqrt(fan_in).
  void fan_in_uniform(Tensor& t, Index fan_in);
  void uniform(Tensor& t, float lo, float hi);
  std::mt19937_64& raw() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool training) = 0;
  virtual Tensor backward(const Tensor& gy) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
  /// Non-optimized state that still belongs in checkpoints (e.g. batch
  /// norm running statistics).
  virtual void collect_buffers(std::vector<Param*>& out) {}
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;

 private:
  Tensor mask_;
};

/// 3x3 depthwise convolution, padding 1, with channel multiplier.
/// (B, C, H, W) -> (B, C*mult, H, W).
class DepthwiseConv2d final : public Layer {
 public:
  DepthwiseConv2d(Index channels, Index multiplier, InitRng& init);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  Index channels_, mult_;
  Param weight_;  // (C*mult, 3, 3)
  Param bias_;    // (C*mult)
  Tensor input_;
};

/// 1x1 channel-mixing convolution over any trailing spatial layout:
/// (B, Cin, inner...) -> (B, Cout, inner...).
class PointwiseConv final : public Layer {
 public:
  PointwiseConv(Index in_ch, Index out_ch, bool bias, InitRng& init);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;

  Index in_channels() const { return in_ch_; }
  Index out_channels() const { return out_ch_; }

 private:
  Index in_ch_, out_ch_;
  bool has_bias_;
  Param weight_;  // (Cout, Cin)
  Param bias_;    // (Cout)
  Tensor input_;
};

/// Small generic KxK convolution (direct); used by the spatial attention
/// gate. (B, Cin, H, W) -> (B, Cout, H, W), odd K, same padding.
class Conv2d final : public Layer {
 public:
  Conv2d(Index in_ch, Index out_ch, Index kernel, InitRng& init);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  Index in_ch_, out_ch_, k_;
  Param weight_;  // (Cout, Cin, K, K)
  Param bias_;    // (Cout)
  Tensor input_;
};

/// Per-channel batch normalization over all non-channel dims of a
/// (B, C, inner...) tensor.
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(Index channels, double eps = 1e-5, double momentum = 0.1);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<Param*>& out) override;

  Param& running_mean() { return running_mean_; }
  Param& running_var() { return running_var_; }

 private:
  Index channels_;
  double eps_, momentum_;
  Param gamma_, beta_;
  Param running_mean_, running_var_;  // not optimized; serialized with params
  Tensor xhat_;
  std::vector<float> inv_std_;
  Index batch_ = 0, inner_ = 0;
  bool training_mode_ = true;
};

/// 2x2 max pooling, stride 2.
class MaxPool2d final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;

 private:
  std::vector<Index> argmax_;
  std::vector<Index> in_shape_;
};

/// x2 bilinear upsampling, align_corners semantics.
class BilinearUpsample2d final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;

 private:
  std::vector<Index> in_shape_;
};

/// CBAM channel gate: shared two-layer bottleneck MLP over spatial mean
/// and max descriptors, sigmoid, channel-wise rescale.
class ChannelAttention final : public Layer {
 public:
  ChannelAttention(Index channels, Index reduction, InitRng& init);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  Index channels_, mid_;
  Param w1_;  // (mid, C)
  Param w2_;  // (C, mid)
  Tensor input_, scale_;
  Tensor avg_, mx_, h1a_, h1m_;
  std::vector<Index> argmax_;
};

/// CBAM spatial gate: channel mean/max maps -> KxK conv -> sigmoid ->
/// pixel-wise rescale.
class SpatialAttention final : public Layer {
 public:
  explicit SpatialAttention(InitRng& init, Index kernel = 7);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  Conv2d conv_;
  Tensor input_, scale_, stacked_;
  std::vector<Index> argmax_;  // channel argmax per pixel
};

class CBAM final : public Layer {
 public:
  CBAM(Index channels, Index reduction, InitRng& init);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  ChannelAttention channel_;
  SpatialAttention spatial_;
};

/// 3x3x3 depthwise convolution, padding 1, channel multiplier.
/// (B, C, D, H, W) -> (B, C*mult, D, H, W).
class DepthwiseConv3d final : public Layer {
 public:
  DepthwiseConv3d(Index channels, Index multiplier, InitRng& init);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  Index channels_, mult_;
  Param weight_;  // (C*mult, 3, 3, 3)
  Param bias_;
  Tensor input_;
};

/// Adaptive max pooling of (B, C, D, H, W) to a fixed output volume.
class AdaptiveMaxPool3d final : public Layer {
 public:
  AdaptiveMaxPool3d(Index out_d, Index out_h, Index out_w);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;

 private:
  Index od_, oh_, ow_;
  std::vector<Index> argmax_;
  std::vector<Index> in_shape_;
};

/// Depthwise-separable convolution stage: depthwise 3x3 -> pointwise 1x1
/// -> batch norm -> ReLU.
class SeparableConvBlock final : public Layer {
 public:
  SeparableConvBlock(Index in_ch, Index out_ch, Index multiplier, InitRng& init);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<Param*>& out) override;

 private:
  DepthwiseConv2d dw_;
  PointwiseConv pw_;
  BatchNorm bn_;
  ReLU relu_;
};

/// Two successive separable stages (the UNet "double conv").
class DoubleConvDS final : public Layer {
 public:
  DoubleConvDS(Index in_ch, Index mid_ch, Index out_ch, Index multiplier,
               InitRng& init);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<Param*>& out) override;

 private:
  SeparableConvBlock a_, b_;
};

/// 3D analogue of SeparableConvBlock for the station branch.
class SeparableConvBlock3d final : public Layer {
 public:
  SeparableConvBlock3d(Index in_ch, Index out_ch, Index multiplier,
                       InitRng& init);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<Param*>& out) override;

 private:
  DepthwiseConv3d dw_;
  PointwiseConv pw_;
  BatchNorm bn_;
  ReLU relu_;
};

/// Channel-wise concatenation helpers with explicit gradient splitting.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, Index ch_a, Tensor& ga, Tensor& gb);

/// Mean squared error; grad_out receives dLoss/dPred.
double mse_loss(const Tensor& pred, const Tensor& target, Tensor* grad_out);

}  // namespace nowcast::nn
