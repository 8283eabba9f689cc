#include "nowcast/nn/adam.hpp"

#include <cmath>

namespace nowcast::nn {

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Param* p : params_) {
    m_.emplace_back(Tensor(p->value.shape()));
    v_.emplace_back(Tensor(p->value.shape()));
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float corr1 = 1.0f - std::pow(b1, static_cast<float>(t_));
  const float corr2 = 1.0f - std::pow(b2, static_cast<float>(t_));
  const float lr = static_cast<float>(lr_);
  const float eps = static_cast<float>(eps_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Param* p = params_[i];
    auto m = m_[i].flat();
    auto v = v_[i].flat();
    auto g = p->grad.flat();
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.square();
    p->value.flat() -=
        lr * (m / corr1) / ((v / corr2).sqrt() + eps);
  }
}

}  // namespace nowcast::nn
