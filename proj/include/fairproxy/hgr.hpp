#pragma once

// Neural estimate of the Hirschfeld-Gebelein-Renyi maximal correlation:
//   max_{f,g} E[ f~(U) g~(V) ]
// where f~, g~ are the network outputs standardized on the batch.

#include "fairproxy/adam.hpp"
#include "fairproxy/log.hpp"
#include "fairproxy/mlp.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <utility>

namespace fairproxy {

struct HgrConfig {
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::leaky_relu;
  std::size_t ascent_steps = 10;
  double lr = 5e-4;
  double eps = 1e-8;
};

inline constexpr std::size_t kMinHgrBatch = 8;

class HgrEstimator {
 public:
  HgrEstimator() = default;

  HgrEstimator(const std::string& name, std::size_t u_dim, std::size_t v_dim, HgrConfig cfg, std::mt19937_64& rng)
      : cfg_(std::move(cfg)),
        f_(name + ".f", layer_widths(u_dim, cfg_.hidden, 1), cfg_.activation, rng),
        g_(name + ".g", layer_widths(v_dim, cfg_.hidden, 1), cfg_.activation, rng),
        opt_f_(f_.params(), AdamConfig{cfg_.lr}),
        opt_g_(g_.params(), AdamConfig{cfg_.lr}) {
    if (cfg_.ascent_steps == 0) throw std::invalid_argument("ascent_steps must be positive");
  }

  // Runs ascent_steps updates of f and g on the batch, then returns the
  // post-update objective clamped to [0, 1]. A batch on which either
  // transform is constant yields 0.
  double estimate_step(const Tensor& u, const Tensor& v) {
    check_batch(u, v);
    for (std::size_t s = 0; s < cfg_.ascent_steps; ++s) {
      Graph graph;
      Var obj = objective_var(graph, graph.constant(u), graph.constant(v), true);
      graph.backward(ad::scale(obj, -1.0));
      opt_f_.step(f_.params());
      opt_g_.step(g_.params());
    }
    const double raw = objective(u, v);
    last_raw_ = raw;
    if (degenerate_) {
      log::warn("HGR estimator: zero-variance transform output on batch; estimate set to 0");
      return 0.0;
    }
    return std::clamp(raw, 0.0, 1.0);
  }

  // Tape-free batch objective with the current weights (unclamped).
  double objective(const Tensor& u, const Tensor& v) {
    check_batch(u, v);
    auto [fu, gv] = standardized_outputs(u, v);
    double s = 0.0;
    for (std::size_t i = 0; i < fu.size(); ++i) s += fu[i] * gv[i];
    return s / static_cast<double>(fu.size());
  }

  // Standardized f(U), g(V) on this batch. Also refreshes the degeneracy flag.
  std::pair<Tensor, Tensor> standardized_outputs(const Tensor& u, const Tensor& v) {
    Tensor fu = f_.apply(u), gv = g_.apply(v);
    const bool df = standardize_in_place(fu), dg = standardize_in_place(gv);
    degenerate_ = df || dg;
    return {std::move(fu), std::move(gv)};
  }

  // |E[f~(U) g~(V)]| on the tape with f, g frozen; gradients reach u and v.
  // The absolute value is the max over the sign of f, which the adversary
  // would otherwise have to relearn whenever the minimizing player pushes
  // the correlation past zero.
  Var penalty(Graph& graph, Var u, Var v) {
    if (u.rows() != v.rows()) throw ShapeError("HGR penalty: row counts differ");
    if (u.rows() < kMinHgrBatch) throw ShapeError("HGR penalty: batch smaller than 8 rows");
    return ad::abs(objective_var(graph, u, v, false));
  }

  Mlp& f() { return f_; }
  Mlp& g() { return g_; }
  const Mlp& f() const { return f_; }
  const Mlp& g() const { return g_; }
  const HgrConfig& config() const { return cfg_; }
  bool last_degenerate() const { return degenerate_; }
  double last_raw() const { return last_raw_; }

 private:
  Var objective_var(Graph& graph, Var u, Var v, bool trainable) {
    Var fu = ad::standardize_cols(f_.forward(graph, u, trainable), cfg_.eps);
    Var gv = ad::standardize_cols(g_.forward(graph, v, trainable), cfg_.eps);
    return ad::mean(ad::mul(fu, gv));
  }

  // Returns true if the column had (numerically) zero variance.
  bool standardize_in_place(Tensor& t) const {
    const double n = static_cast<double>(t.size());
    double mu = 0.0;
    for (double x : t.data()) mu += x;
    mu /= n;
    double var = 0.0;
    for (double x : t.data()) var += (x - mu) * (x - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + cfg_.eps);
    for (double& x : t.data()) x = (x - mu) * inv;
    return var <= 1e-24;
  }

  static void check_batch(const Tensor& u, const Tensor& v) {
    if (u.rows() != v.rows()) throw ShapeError("HGR estimate: row counts differ");
    if (u.rows() < kMinHgrBatch) throw ShapeError("HGR estimate: batch smaller than 8 rows");
  }

  HgrConfig cfg_;
  Mlp f_, g_;
  Adam opt_f_, opt_g_;
  bool degenerate_ = false;
  double last_raw_ = 0.0;
};

}  // namespace fairproxy
