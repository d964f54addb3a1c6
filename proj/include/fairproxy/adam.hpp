#pragma once

#include "fairproxy/autodiff.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace fairproxy {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adaptive-moment optimizer bound to one ParamSet layout.
class Adam {
 public:
  Adam() = default;

  Adam(const ParamSet& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.rows(), p.value.cols());
      v_.emplace_back(p.value.rows(), p.value.cols());
    }
  }

  // Minimizes along the accumulated grads, then zeroes them. A non-finite
  // gradient aborts before any parameter is touched.
  void step(ParamSet& params) {
    if (params.size() != m_.size()) throw ShapeError("Adam: parameter set layout changed");
    for (const auto& p : params) {
      if (!p.grad.all_finite()) throw NumericalError("non-finite gradient for parameter " + p.name);
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t i = 0;
    for (auto& p : params) {
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      if (!m.same_shape(p.value)) throw ShapeError("Adam: moment shape mismatch for " + p.name);
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        const double g = p.grad[k];
        m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
        v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        p.value[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
      p.grad.fill(0.0);
      ++i;
    }
  }

  std::uint64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace fairproxy
