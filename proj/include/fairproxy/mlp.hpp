#pragma once

#include "fairproxy/autodiff.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace fairproxy {

enum class Activation { relu, leaky_relu, tanh, identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

// Fully connected network. Hidden layers use `hidden_activation`; the last
// layer is always affine. Parameters are named "<name>.W<l>" / "<name>.b<l>".
class Mlp {
 public:
  Mlp() = default;

  Mlp(const std::string& name, std::vector<std::size_t> widths, Activation hidden_activation,
      std::mt19937_64& rng, double leaky_slope = 0.01)
      : widths_(std::move(widths)), act_(hidden_activation), slope_(leaky_slope), params_(name) {
    if (widths_.size() < 2) throw ShapeError("Mlp needs at least input and output widths");
    for (std::size_t w : widths_) {
      if (w == 0) throw ShapeError("Mlp layer width must be positive");
    }
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const std::size_t fan_in = widths_[l], fan_out = widths_[l + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      Tensor w(fan_in, fan_out), b(1, fan_out);
      for (auto& v : w.data()) v = u(rng);
      for (auto& v : b.data()) v = u(rng);
      params_.add("W" + std::to_string(l), std::move(w));
      params_.add("b" + std::to_string(l), std::move(b));
    }
  }

  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  std::size_t layers() const { return widths_.size() - 1; }
  const std::vector<std::size_t>& widths() const { return widths_; }
  Activation activation() const { return act_; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  Parameter& weight(std::size_t layer) { return params_[2 * layer]; }
  Parameter& bias(std::size_t layer) { return params_[2 * layer + 1]; }

  // Records the forward pass on the tape. With trainable=false the weights
  // enter as constants (gradients still flow into x).
  Var forward(Graph& g, Var x, bool trainable = true) {
    check_input(x.value());
    Var h = x;
    for (std::size_t l = 0; l < layers(); ++l) {
      h = ad::add_row(ad::matmul(h, g.param(weight(l), trainable)), g.param(bias(l), trainable));
      if (l + 1 < layers()) h = activate(h);
    }
    return h;
  }

  // Tape-free evaluation.
  Tensor apply(const Tensor& x) const {
    check_input(x);
    RowMatrix h = x.mat();
    for (std::size_t l = 0; l < layers(); ++l) {
      RowMatrix next = h * params_[2 * l].value.mat();
      next.rowwise() += params_[2 * l + 1].value.mat().row(0);
      if (l + 1 < layers()) apply_activation(next);
      h = std::move(next);
    }
    return Tensor::from_matrix(h);
  }

 private:
  void check_input(const Tensor& x) const {
    if (x.cols() != in_dim()) {
      throw ShapeError("Mlp " + params_.prefix() + ": expected " + std::to_string(in_dim()) +
                       " input columns, got " + std::to_string(x.cols()));
    }
    if (!x.all_finite()) throw NumericalError("Mlp " + params_.prefix() + ": non-finite input");
  }

  Var activate(Var h) const {
    switch (act_) {
      case Activation::relu: return ad::relu(h);
      case Activation::leaky_relu: return ad::leaky_relu(h, slope_);
      case Activation::tanh: return ad::tanh(h);
      case Activation::identity: return h;
    }
    return h;
  }

  void apply_activation(RowMatrix& m) const {
    switch (act_) {
      case Activation::relu: m = m.cwiseMax(0.0); break;
      case Activation::leaky_relu: m = m.unaryExpr([s = slope_](double v) { return v > 0.0 ? v : s * v; }); break;
      case Activation::tanh: m = m.array().tanh().matrix(); break;
      case Activation::identity: break;
    }
  }

  std::vector<std::size_t> widths_;
  Activation act_ = Activation::leaky_relu;
  double slope_ = 0.01;
  ParamSet params_;
};

// Widths {in, hidden..., out}.
inline std::vector<std::size_t> layer_widths(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace fairproxy
