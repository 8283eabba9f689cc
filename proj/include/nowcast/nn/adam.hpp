#pragma once

#include "nowcast/nn/layers.hpp"

#include <vector>

namespace nowcast::nn {

/// Adam with bias correction; one slot pair (m, v) per parameter tensor.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, double lr = 1e-3,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step();

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  const std::vector<Param*>& params() const { return params_; }

  /// Optimizer state for checkpointing: per-param (m, v) plus step count.
  std::int64_t step_count() const { return t_; }
  std::vector<Tensor>& slots_m() { return m_; }
  std::vector<Tensor>& slots_v() { return v_; }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  std::vector<Param*> params_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace nowcast::nn
