#pragma once

#include <vector>

#include "sar/autodiff.hpp"
#include "sar/rng.hpp"

namespace sar {

// Adam with bias correction over a fixed parameter list.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Param* p : params_) {
      m_.emplace_back(p->value.rows, p->value.cols);
      v_.emplace_back(p->value.rows, p->value.cols);
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Param& p = *params_[i];
      for (size_t j = 0; j < p.value.size(); ++j) {
        const double g = p.grad.data[j];
        m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
        v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
        const double mhat = m_[i].data[j] / bc1;
        const double vhat = v_[i].data[j] / bc2;
        p.value.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void zero_grads() {
    for (Param* p : params_) p->zero_grad();
  }

  double lr() const { return lr_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

inline void init_uniform(Param& p, Rng& rng, double radius = 0.08) {
  for (double& v : p.value.data) v = rng.uniform(-radius, radius);
}

}  // namespace sar
