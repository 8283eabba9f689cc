#pragma once

#include "nowcast/data.hpp"
#include "nowcast/nn/layers.hpp"

#include <memory>
#include <string>
#include <vector>

namespace nowcast {

/// Frozen architecture configuration. The channel plan (64..512 with a
/// halved bottleneck, depthwise multiplier 2, decoder mid = in/2) pins the
/// instantiated parameter counts near 4.0M / 5.6M / 11.6M.
struct NetConfig {
  Index input_frames = 12;
  Index output_frames = 1;
  Index base_channels = 64;
  Index encoder_levels = 5;
  Index multiplier = 2;             // depthwise kernels per layer
  Index attention_reduction = 16;   // CBAM bottleneck ratio
  Index station_channels = 448;     // fUsion station-branch width
  Index krige_channels = 96;        // flattened 12 lags x 8 variables
  bool dual_concat_feeds_next_level = true;
  std::uint64_t seed = 0;

  std::string describe() const;
};

/// One minibatch of model inputs. Optional tensors are empty when the
/// architecture does not consume them.
struct ForwardBatch {
  Tensor precip;   // (B, 12, 64, 64), normalized
  Tensor station;  // (B, 22, 8, 12), standardized
  Tensor krige;    // (B, 96, 64, 64), standardized, lag-major
  Tensor target;   // (B, 1, 64, 64), normalized
};

/// Gradients of the loss with respect to the batch inputs, captured by the
/// last backward pass.
struct InputGradients {
  Tensor precip;
  Tensor station;
  Tensor krige;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual std::string name() const = 0;
  virtual Tensor forward(const ForwardBatch& batch, bool training) = 0;
  virtual void backward(const Tensor& gy) = 0;
  virtual std::vector<nn::Param*> params() = 0;
  /// Checkpointed but non-optimized state (batch norm running stats).
  virtual std::vector<nn::Param*> buffers() { return {}; }
  virtual bool trainable() const { return true; }
  virtual bool wants_station() const { return false; }
  virtual bool wants_krige() const { return false; }
  virtual const InputGradients& input_gradients() const = 0;
};

/// names: smaat_unet, smaat_fusion, smaat_krige_gnet, persistence
std::unique_ptr<Model> make_model(const std::string& name, const NetConfig& config);

Index parameter_count(Model& model);

}  // namespace nowcast
