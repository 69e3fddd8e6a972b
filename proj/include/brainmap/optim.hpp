#pragma once

#include <cmath>
#include <vector>

#include "brainmap/autodiff.hpp"
#include "brainmap/matrix.hpp"

namespace brainmap {

struct AdamConfig {
  double lr = 0.003;
  double weight_decay = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with L2 weight decay folded into the gradient. Moments are kept per
/// parameter in registration order.
class Adam {
 public:
  explicit Adam(const std::vector<ad::Var>& params, AdamConfig cfg = {})
      : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }

  /// One update from the gradients currently accumulated in the leaves.
  void step(const std::vector<ad::Var>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Matrix& value = params[k]->value;
      const Matrix& grad = params[k]->grad;
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = grad.data()[i] + cfg_.weight_decay * value.data()[i];
        double& m = m_[k].data()[i];
        double& v = v_[k].data()[i];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
        value.data()[i] -= cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace brainmap
