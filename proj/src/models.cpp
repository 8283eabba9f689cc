#include "nowcast/models.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace nowcast {

namespace {

using nn::AdaptiveMaxPool3d;
using nn::BilinearUpsample2d;
using nn::CBAM;
using nn::DoubleConvDS;
using nn::InitRng;
using nn::MaxPool2d;
using nn::Param;
using nn::PointwiseConv;
using nn::SeparableConvBlock3d;
using nn::concat_channels;
using nn::split_channels;

void add_inplace(Tensor& a, const Tensor& b) { a.flat() += b.flat(); }

/// SmaAt-UNet trunk: 5-level depthwise-separable encoder with CBAM skip
/// gates, bilinear decoder, optional extra channels concatenated onto the
/// bottleneck (used by the fUsion variant).
class UNetBackbone {
 public:
  UNetBackbone(const NetConfig& cfg, Index in_ch, Index extra, InitRng& rng)
      : c1_(cfg.base_channels),
        c2_(2 * cfg.base_channels),
        c3_(4 * cfg.base_channels),
        c4_(8 * cfg.base_channels),
        c5_(8 * cfg.base_channels),
        extra_(extra),
        inc_(in_ch, c1_, c1_, cfg.multiplier, rng),
        dconv1_(c1_, c2_, c2_, cfg.multiplier, rng),
        dconv2_(c2_, c3_, c3_, cfg.multiplier, rng),
        dconv3_(c3_, c4_, c4_, cfg.multiplier, rng),
        dconv4_(c4_, c5_, c5_, cfg.multiplier, rng),
        cbam1_(c1_, cfg.attention_reduction, rng),
        cbam2_(c2_, cfg.attention_reduction, rng),
        cbam3_(c3_, cfg.attention_reduction, rng),
        cbam4_(c4_, cfg.attention_reduction, rng),
        cbam5_(c5_, cfg.attention_reduction, rng),
        upconv1_(c4_ + c5_ + extra, (c4_ + c5_ + extra) / 2, c3_, cfg.multiplier, rng),
        upconv2_(c3_ + c3_, c3_, c2_, cfg.multiplier, rng),
        upconv3_(c2_ + c2_, c2_, c1_, cfg.multiplier, rng),
        upconv4_(c1_ + c1_, c1_, c1_, cfg.multiplier, rng),
        outc_(c1_, 1, true, rng) {}

  Tensor forward(const Tensor& x, const Tensor* extra, bool training) {
    if ((extra != nullptr) != (extra_ > 0))
      throw std::invalid_argument("UNetBackbone: bottleneck input mismatch");
    Tensor x1 = inc_.forward(x, training);
    Tensor a1 = cbam1_.forward(x1, training);
    Tensor x2 = dconv1_.forward(pool1_.forward(x1, training), training);
    Tensor a2 = cbam2_.forward(x2, training);
    Tensor x3 = dconv2_.forward(pool2_.forward(x2, training), training);
    Tensor a3 = cbam3_.forward(x3, training);
    Tensor x4 = dconv3_.forward(pool3_.forward(x3, training), training);
    Tensor a4 = cbam4_.forward(x4, training);
    Tensor x5 = dconv4_.forward(pool4_.forward(x4, training), training);
    Tensor a5 = cbam5_.forward(x5, training);
    Tensor bott = extra ? concat_channels(a5, *extra) : std::move(a5);
    Tensor u = upconv1_.forward(concat_channels(a4, up1_.forward(bott, training)), training);
    u = upconv2_.forward(concat_channels(a3, up2_.forward(u, training)), training);
    u = upconv3_.forward(concat_channels(a2, up3_.forward(u, training)), training);
    u = upconv4_.forward(concat_channels(a1, up4_.forward(u, training)), training);
    return outc_.forward(u, training);
  }

  /// Returns the gradient w.r.t. the input; fills grad_extra when the
  /// bottleneck carries extra channels.
  Tensor backward(const Tensor& gy, Tensor* grad_extra) {
    Tensor g = outc_.backward(gy);
    Tensor ga1, ga2, ga3, ga4, gup;
    g = upconv4_.backward(g);
    split_channels(g, c1_, ga1, gup);
    g = upconv3_.backward(up4_.backward(gup));
    split_channels(g, c2_, ga2, gup);
    g = upconv2_.backward(up3_.backward(gup));
    split_channels(g, c3_, ga3, gup);
    g = upconv1_.backward(up2_.backward(gup));
    split_channels(g, c4_, ga4, gup);
    Tensor gbott = up1_.backward(gup);

    Tensor ga5;
    if (extra_ > 0) {
      Tensor ge;
      split_channels(gbott, c5_, ga5, ge);
      if (grad_extra) *grad_extra = std::move(ge);
    } else {
      ga5 = std::move(gbott);
    }

    Tensor gx5 = cbam5_.backward(ga5);
    Tensor gx4 = cbam4_.backward(ga4);
    add_inplace(gx4, pool4_.backward(dconv4_.backward(gx5)));
    Tensor gx3 = cbam3_.backward(ga3);
    add_inplace(gx3, pool3_.backward(dconv3_.backward(gx4)));
    Tensor gx2 = cbam2_.backward(ga2);
    add_inplace(gx2, pool2_.backward(dconv2_.backward(gx3)));
    Tensor gx1 = cbam1_.backward(ga1);
    add_inplace(gx1, pool1_.backward(dconv1_.backward(gx2)));
    return inc_.backward(gx1);
  }

  void collect_buffers(std::vector<Param*>& out) {
    inc_.collect_buffers(out);
    dconv1_.collect_buffers(out);
    dconv2_.collect_buffers(out);
    dconv3_.collect_buffers(out);
    dconv4_.collect_buffers(out);
    upconv1_.collect_buffers(out);
    upconv2_.collect_buffers(out);
    upconv3_.collect_buffers(out);
    upconv4_.collect_buffers(out);
  }

  void collect_params(std::vector<Param*>& out) {
    inc_.collect_params(out);
    dconv1_.collect_params(out);
    dconv2_.collect_params(out);
    dconv3_.collect_params(out);
    dconv4_.collect_params(out);
    cbam1_.collect_params(out);
    cbam2_.collect_params(out);
    cbam3_.collect_params(out);
    cbam4_.collect_params(out);
    cbam5_.collect_params(out);
    upconv1_.collect_params(out);
    upconv2_.collect_params(out);
    upconv3_.collect_params(out);
    upconv4_.collect_params(out);
    outc_.collect_params(out);
  }

 private:
  Index c1_, c2_, c3_, c4_, c5_, extra_;
  DoubleConvDS inc_, dconv1_, dconv2_, dconv3_, dconv4_;
  CBAM cbam1_, cbam2_, cbam3_, cbam4_, cbam5_;
  MaxPool2d pool1_, pool2_, pool3_, pool4_;
  BilinearUpsample2d up1_, up2_, up3_, up4_;
  DoubleConvDS upconv1_, upconv2_, upconv3_, upconv4_;
  PointwiseConv outc_;
};

void check_precip(const Tensor& t, const NetConfig& cfg) {
  if (t.ndim() != 4 || t.dim(1) != cfg.input_frames || t.dim(2) != kGridSize ||
      t.dim(3) != kGridSize)
    throw std::invalid_argument("model: precip input must be (B,12,64,64), got " +
                                t.shape_str());
}

class SmaAtUNet final : public Model {
 public:
  explicit SmaAtUNet(const NetConfig& cfg)
      : cfg_(cfg), rng_(cfg.seed), core_(cfg, cfg.input_frames, 0, rng_) {}

  std::string name() const override { return "smaat_unet"; }

  Tensor forward(const ForwardBatch& batch, bool training) override {
    check_precip(batch.precip, cfg_);
    return core_.forward(batch.precip, nullptr, training);
  }

  void backward(const Tensor& gy) override {
    grads_.precip = core_.backward(gy, nullptr);
  }

  std::vector<Param*> params() override {
    std::vector<Param*> p;
    core_.collect_params(p);
    return p;
  }

  std::vector<Param*> buffers() override {
    std::vector<Param*> p;
    core_.collect_buffers(p);
    return p;
  }

  const InputGradients& input_gradients() const override { return grads_; }

 private:
  NetConfig cfg_;
  InitRng rng_;
  UNetBackbone core_;
  InputGradients grads_;
};

class SmaAtFusion final : public Model {
 public:
  explicit SmaAtFusion(const NetConfig& cfg)
      : cfg_(cfg),
        rng_(cfg.seed),
        core_(cfg, cfg.input_frames, cfg.station_channels, rng_),
        s1_(1, cfg.station_channels, cfg.multiplier, rng_),
        s2_(cfg.station_channels, cfg.station_channels, cfg.multiplier, rng_),
        pool_(1, 4, 4) {}

  std::string name() const override { return "smaat_fusion"; }
  bool wants_station() const override { return true; }

  Tensor forward(const ForwardBatch& batch, bool training) override {
    check_precip(batch.precip, cfg_);
    if (batch.station.ndim() != 4 || batch.station.dim(1) != kNumStations ||
        batch.station.dim(2) != kNumVariables || batch.station.dim(3) != kNumLags)
      throw std::invalid_argument("smaat_fusion: station input must be (B,22,8,12)");
    const Index B = batch.station.dim(0);
    Tensor vol = batch.station;
    vol.reshape({B, 1, kNumStations, kNumVariables, kNumLags});
    Tensor e = s2_.forward(s1_.forward(vol, training), training);
    Tensor p = pool_.forward(e, training);  // (B, Cs, 1, 4, 4)
    p.reshape({B, cfg_.station_channels, 4, 4});
    return core_.forward(batch.precip, &p, training);
  }

  void backward(const Tensor& gy) override {
    Tensor gextra;
    grads_.precip = core_.backward(gy, &gextra);
    const Index B = gextra.dim(0);
    gextra.reshape({B, cfg_.station_channels, 1, 4, 4});
    Tensor gs = s1_.backward(s2_.backward(pool_.backward(gextra)));
    gs.reshape({B, kNumStations, kNumVariables, kNumLags});
    grads_.station = std::move(gs);
  }

  std::vector<Param*> params() override {
    std::vector<Param*> p;
    core_.collect_params(p);
    s1_.collect_params(p);
    s2_.collect_params(p);
    return p;
  }

  std::vector<Param*> buffers() override {
    std::vector<Param*> p;
    core_.collect_buffers(p);
    s1_.collect_buffers(p);
    s2_.collect_buffers(p);
    return p;
  }

  const InputGradients& input_gradients() const override { return grads_; }

 private:
  NetConfig cfg_;
  InitRng rng_;
  UNetBackbone core_;
  SeparableConvBlock3d s1_, s2_;
  AdaptiveMaxPool3d pool_;
  InputGradients grads_;
};

/// Dual-encoder net: a second encoder mirrors the precipitation stream
/// over the 96-channel kriged stack; its per-level outputs are
/// concatenated channel-wise onto the precipitation stream before the
/// skip gates and (by default) before the next encoder level.
class SmaAtKrigeGNet final : public Model {
 public:
  explicit SmaAtKrigeGNet(const NetConfig& cfg)
      : cfg_(cfg),
        rng_(cfg.seed),
        both_(cfg.dual_concat_feeds_next_level),
        c1_(cfg.base_channels),
        c2_(2 * cfg.base_channels),
        c3_(4 * cfg.base_channels),
        c4_(8 * cfg.base_channels),
        c5_(8 * cfg.base_channels),
        kinc_(cfg.krige_channels, c1_, c1_, cfg.multiplier, rng_),
        kconv1_(c1_, c2_, c2_, cfg.multiplier, rng_),
        kconv2_(c2_, c3_, c3_, cfg.multiplier, rng_),
        kconv3_(c3_, c4_, c4_, cfg.multiplier, rng_),
        kconv4_(c4_, c5_, c5_, cfg.multiplier, rng_),
        pinc_(cfg.input_frames, c1_, c1_, cfg.multiplier, rng_),
        pconv1_(both_ ? 2 * c1_ : c1_, c2_, c2_, cfg.multiplier, rng_),
        pconv2_(both_ ? 2 * c2_ : c2_, c3_, c3_, cfg.multiplier, rng_),
        pconv3_(both_ ? 2 * c3_ : c3_, c4_, c4_, cfg.multiplier, rng_),
        pconv4_(both_ ? 2 * c4_ : c4_, c5_, c5_, cfg.multiplier, rng_),
        cbam1_(2 * c1_, cfg.attention_reduction, rng_),
        cbam2_(2 * c2_, cfg.attention_reduction, rng_),
        cbam3_(2 * c3_, cfg.attention_reduction, rng_),
        cbam4_(2 * c4_, cfg.attention_reduction, rng_),
        cbam5_(2 * c5_, cfg.attention_reduction, rng_),
        upconv1_(2 * c4_ + 2 * c5_, c4_ + c5_, c3_, cfg.multiplier, rng_),
        upconv2_(c3_ + 2 * c3_, (c3_ + 2 * c3_) / 2, c2_, cfg.multiplier, rng_),
        upconv3_(c2_ + 2 * c2_, (c2_ + 2 * c2_) / 2, c1_, cfg.multiplier, rng_),
        upconv4_(c1_ + 2 * c1_, (c1_ + 2 * c1_) / 2, c1_, cfg.multiplier, rng_),
        outc_(c1_, 1, true, rng_) {}

  std::string name() const override { return "smaat_krige_gnet"; }
  bool wants_krige() const override { return true; }

  Tensor forward(const ForwardBatch& batch, bool training) override {
    check_precip(batch.precip, cfg_);
    if (batch.krige.ndim() != 4 || batch.krige.dim(1) != cfg_.krige_channels ||
        batch.krige.dim(2) != kGridSize || batch.krige.dim(3) != kGridSize)
      throw std::invalid_argument("smaat_krige_gnet: krige input must be (B,96,64,64)");

    Tensor k1 = kinc_.forward(batch.krige, training);
    Tensor p1 = pinc_.forward(batch.precip, training);
    Tensor cat1 = concat_channels(p1, k1);
    Tensor a1 = cbam1_.forward(cat1, training);

    Tensor k2 = kconv1_.forward(kpool1_.forward(k1, training), training);
    Tensor p2 = pconv1_.forward(ppool1_.forward(both_ ? cat1 : p1, training), training);
    Tensor cat2 = concat_channels(p2, k2);
    Tensor a2 = cbam2_.forward(cat2, training);

    Tensor k3 = kconv2_.forward(kpool2_.forward(k2, training), training);
    Tensor p3 = pconv2_.forward(ppool2_.forward(both_ ? cat2 : p2, training), training);
    Tensor cat3 = concat_channels(p3, k3);
    Tensor a3 = cbam3_.forward(cat3, training);

    Tensor k4 = kconv3_.forward(kpool3_.forward(k3, training), training);
    Tensor p4 = pconv3_.forward(ppool3_.forward(both_ ? cat3 : p3, training), training);
    Tensor cat4 = concat_channels(p4, k4);
    Tensor a4 = cbam4_.forward(cat4, training);

    Tensor k5 = kconv4_.forward(kpool4_.forward(k4, training), training);
    Tensor p5 = pconv4_.forward(ppool4_.forward(both_ ? cat4 : p4, training), training);
    Tensor cat5 = concat_channels(p5, k5);
    Tensor a5 = cbam5_.forward(cat5, training);

    Tensor u = upconv1_.forward(concat_channels(a4, up1_.forward(a5, training)), training);
    u = upconv2_.forward(concat_channels(a3, up2_.forward(u, training)), training);
    u = upconv3_.forward(concat_channels(a2, up3_.forward(u, training)), training);
    u = upconv4_.forward(concat_channels(a1, up4_.forward(u, training)), training);
    return outc_.forward(u, training);
  }

  void backward(const Tensor& gy) override {
    Tensor g = outc_.backward(gy);
    Tensor ga1, ga2, ga3, ga4, gup;
    g = upconv4_.backward(g);
    split_channels(g, 2 * c1_, ga1, gup);
    g = upconv3_.backward(up4_.backward(gup));
    split_channels(g, 2 * c2_, ga2, gup);
    g = upconv2_.backward(up3_.backward(gup));
    split_channels(g, 2 * c3_, ga3, gup);
    g = upconv1_.backward(up2_.backward(gup));
    split_channels(g, 2 * c4_, ga4, gup);
    Tensor ga5 = up1_.backward(gup);

    // level 5
    Tensor gc5 = cbam5_.backward(ga5);
    Tensor gp5, gk5;
    split_channels(gc5, c5_, gp5, gk5);
    Tensor g_enc4 = ppool4_.backward(pconv4_.backward(gp5));
    Tensor gk4 = kpool4_.backward(kconv4_.backward(gk5));

    // level 4
    Tensor gc4 = cbam4_.backward(ga4);
    Tensor gp4;
    {
      if (both_) add_inplace(gc4, g_enc4);
      Tensor gk_skip;
      split_channels(gc4, c4_, gp4, gk_skip);
      add_inplace(gk4, gk_skip);
      if (!both_) add_inplace(gp4, g_enc4);
    }
    Tensor g_enc3 = ppool3_.backward(pconv3_.backward(gp4));
    Tensor gk3 = kpool3_.backward(kconv3_.backward(gk4));

    // level 3
    Tensor gc3 = cbam3_.backward(ga3);
    Tensor gp3;
    {
      if (both_) add_inplace(gc3, g_enc3);
      Tensor gk_skip;
      split_channels(gc3, c3_, gp3, gk_skip);
      add_inplace(gk3, gk_skip);
      if (!both_) add_inplace(gp3, g_enc3);
    }
    Tensor g_enc2 = ppool2_.backward(pconv2_.backward(gp3));
    Tensor gk2 = kpool2_.backward(kconv2_.backward(gk3));

    // level 2
    Tensor gc2 = cbam2_.backward(ga2);
    Tensor gp2;
    {
      if (both_) add_inplace(gc2, g_enc2);
      Tensor gk_skip;
      split_channels(gc2, c2_, gp2, gk_skip);
      add_inplace(gk2, gk_skip);
      if (!both_) add_inplace(gp2, g_enc2);
    }
    Tensor g_enc1 = ppool1_.backward(pconv1_.backward(gp2));
    Tensor gk1 = kpool1_.backward(kconv1_.backward(gk2));

    // level 1
    Tensor gc1 = cbam1_.backward(ga1);
    Tensor gp1;
    {
      if (both_) add_inplace(gc1, g_enc1);
      Tensor gk_skip;
      split_channels(gc1, c1_, gp1, gk_skip);
      add_inplace(gk1, gk_skip);
      if (!both_) add_inplace(gp1, g_enc1);
    }
    grads_.krige = kinc_.backward(gk1);
    grads_.precip = pinc_.backward(gp1);
  }

  std::vector<Param*> params() override {
    std::vector<Param*> p;
    kinc_.collect_params(p);
    kconv1_.collect_params(p);
    kconv2_.collect_params(p);
    kconv3_.collect_params(p);
    kconv4_.collect_params(p);
    pinc_.collect_params(p);
    pconv1_.collect_params(p);
    pconv2_.collect_params(p);
    pconv3_.collect_params(p);
    pconv4_.collect_params(p);
    cbam1_.collect_params(p);
    cbam2_.collect_params(p);
    cbam3_.collect_params(p);
    cbam4_.collect_params(p);
    cbam5_.collect_params(p);
    upconv1_.collect_params(p);
    upconv2_.collect_params(p);
    upconv3_.collect_params(p);
    upconv4_.collect_params(p);
    outc_.collect_params(p);
    return p;
  }

  std::vector<Param*> buffers() override {
    std::vector<Param*> p;
    kinc_.collect_buffers(p);
    kconv1_.collect_buffers(p);
    kconv2_.collect_buffers(p);
    kconv3_.collect_buffers(p);
    kconv4_.collect_buffers(p);
    pinc_.collect_buffers(p);
    pconv1_.collect_buffers(p);
    pconv2_.collect_buffers(p);
    pconv3_.collect_buffers(p);
    pconv4_.collect_buffers(p);
    upconv1_.collect_buffers(p);
    upconv2_.collect_buffers(p);
    upconv3_.collect_buffers(p);
    upconv4_.collect_buffers(p);
    return p;
  }

  const InputGradients& input_gradients() const override { return grads_; }

 private:
  NetConfig cfg_;
  InitRng rng_;
  bool both_;
  Index c1_, c2_, c3_, c4_, c5_;
  DoubleConvDS kinc_, kconv1_, kconv2_, kconv3_, kconv4_;
  DoubleConvDS pinc_, pconv1_, pconv2_, pconv3_, pconv4_;
  CBAM cbam1_, cbam2_, cbam3_, cbam4_, cbam5_;
  MaxPool2d kpool1_, kpool2_, kpool3_, kpool4_;
  MaxPool2d ppool1_, ppool2_, ppool3_, ppool4_;
  BilinearUpsample2d up1_, up2_, up3_, up4_;
  DoubleConvDS upconv1_, upconv2_, upconv3_, upconv4_;
  PointwiseConv outc_;
  InputGradients grads_;
};

class Persistence final : public Model {
 public:
  explicit Persistence(const NetConfig& cfg) : cfg_(cfg) {}

  std::string name() const override { return "persistence"; }
  bool trainable() const override { return false; }

  Tensor forward(const ForwardBatch& batch, bool) override {
    const Tensor& x = batch.precip;
    if (x.ndim() != 4 || x.dim(1) < 1)
      throw std::invalid_argument("persistence: need at least one input frame");
    const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    last_shape_ = x.shape();
    Tensor y({B, 1, H, W});
    for (Index n = 0; n < B; ++n)
      std::copy(x.data() + ((n * C + C - 1) * H) * W,
                x.data() + ((n * C + C) * H) * W, y.data() + n * H * W);
    return y;
  }

  void backward(const Tensor& gy) override {
    const Index B = last_shape_[0], C = last_shape_[1], H = last_shape_[2],
                W = last_shape_[3];
    grads_.precip = Tensor(last_shape_);
    for (Index n = 0; n < B; ++n)
      std::copy(gy.data() + n * H * W, gy.data() + (n + 1) * H * W,
                grads_.precip.data() + ((n * C + C - 1) * H) * W);
  }

  std::vector<Param*> params() override { return {}; }
  const InputGradients& input_gradients() const override { return grads_; }

 private:
  NetConfig cfg_;
  std::vector<Index> last_shape_;
  InputGradients grads_;
};

}  // namespace

std::string NetConfig::describe() const {
  std::ostringstream out;
  out << "input_frames = " << input_frames << "\n"
      << "output_frames = " << output_frames << "\n"
      << "base_channels = " << base_channels << "\n"
      << "encoder_levels = " << encoder_levels << "\n"
      << "multiplier = " << multiplier << "\n"
      << "attention_reduction = " << attention_reduction << "\n"
      << "station_channels = " << station_channels << "\n"
      << "krige_channels = " << krige_channels << "\n"
      << "dual_concat_feeds_next_level = "
      << (dual_concat_feeds_next_level ? "true" : "false") << "\n"
      << "seed = " << seed << "\n";
  return out.str();
}

std::unique_ptr<Model> make_model(const std::string& name, const NetConfig& config) {
  if (name == "smaat_unet") return std::make_unique<SmaAtUNet>(config);
  if (name == "smaat_fusion") return std::make_unique<SmaAtFusion>(config);
  if (name == "smaat_krige_gnet") return std::make_unique<SmaAtKrigeGNet>(config);
  if (name == "persistence") return std::make_unique<Persistence>(config);
  throw std::invalid_argument("unknown model: " + name);
}

Index parameter_count(Model& model) {
  Index n = 0;
  for (const nn::Param* p : model.params()) n += p->value.numel();
  return n;
}

}  // namespace nowcast
