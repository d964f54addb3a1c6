#pragma once

// Tape-based reverse-mode differentiation over 2-D tensors.
//
// Nodes are appended in evaluation order, so the tape is already a
// topological ordering and backward() is a single reverse sweep.

#include "fairproxy/tensor.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace fairproxy {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Named trainable leaves of one network. Indices are stable; copying a set
// yields an independent snapshot.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::string prefix) : prefix_(std::move(prefix)) {}

  std::size_t add(const std::string& name, Tensor init) {
    const std::string full = prefix_.empty() ? name : prefix_ + "." + name;
    for (const auto& p : params_) {
      if (p.name == full) throw std::invalid_argument("duplicate parameter name: " + full);
    }
    Tensor g(init.rows(), init.cols());
    params_.push_back(Parameter{full, std::move(init), std::move(g)});
    return params_.size() - 1;
  }

  Parameter& operator[](std::size_t i) { return params_.at(i); }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }

  Parameter* find(const std::string& name) {
    for (auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  std::size_t size() const noexcept { return params_.size(); }
  const std::string& prefix() const noexcept { return prefix_; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::string prefix_;
  std::vector<Parameter> params_;
};

class Graph;

// Handle to a node on a Graph tape. Cheap to copy; only valid while the
// owning graph is alive and not cleared.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

class Graph {
 public:
  // Called during the reverse sweep with the node's output gradient. The
  // callback adds into its inputs via accumulate().
  using Backward = std::function<void(Graph&, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value) {
    check_finite(value, "input");
    return push(std::move(value), {}, nullptr, nullptr, false);
  }

  // A parameter leaf. Frozen leaves behave like constants: gradients stop there.
  Var param(Parameter& p, bool trainable = true) {
    if (!p.value.all_finite()) throw NumericalError("non-finite parameter " + p.name);
    return push(p.value, {}, nullptr, trainable ? &p : nullptr, trainable);
  }

  Var record(Tensor value, std::vector<Var> inputs, Backward backward) {
    bool needs = false;
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (const auto& v : inputs) {
      if (v.graph != this) throw std::invalid_argument("Var belongs to a different graph");
      ids.push_back(v.id);
      needs = needs || nodes_[v.id].needs_grad;
    }
    return push(std::move(value), std::move(ids), needs ? std::move(backward) : nullptr, nullptr, needs);
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Adds g into the gradient slot of input `which` of the node currently
  // being back-propagated.
  void accumulate(std::size_t which, const Tensor& g) {
    const std::size_t id = nodes_[current_].inputs.at(which);
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.empty()) {
      n.grad = g;
    } else {
      n.grad.mat() += g.mat();
    }
  }
  bool input_needs_grad(std::size_t which) const {
    return nodes_[nodes_[current_].inputs.at(which)].needs_grad;
  }
  const Tensor& input_value(std::size_t which) const {
    return nodes_[nodes_[current_].inputs.at(which)].value;
  }

  // Reverse sweep from a scalar loss. Gradients are added into each
  // trainable Parameter::grad. Returns the names of trainable parameters
  // that appear on the tape but received no gradient; their grads are
  // left at zero.
  std::vector<std::string> backward(Var loss) {
    if (loss.graph != this) throw std::invalid_argument("loss belongs to a different graph");
    const Tensor& lv = nodes_.at(loss.id).value;
    if (!lv.is_scalar()) throw ShapeError("backward() needs a scalar loss, got " + lv.shape_string());
    for (auto& n : nodes_) n.grad = Tensor();
    std::vector<std::string> disconnected;
    if (!nodes_[loss.id].needs_grad) {
      for (const auto& n : nodes_) {
        if (n.param) disconnected.push_back(n.param->name);
      }
      return disconnected;
    }
    nodes_[loss.id].grad = Tensor::scalar(1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.param) {
        if (n.grad.empty()) {
          disconnected.push_back(n.param->name);
        } else {
          if (!n.param->grad.same_shape(n.grad)) n.param->grad = Tensor(n.grad.rows(), n.grad.cols());
          n.param->grad.mat() += n.grad.mat();
        }
        continue;
      }
      if (!n.backward || n.grad.empty()) continue;
      current_ = i;
      Tensor g = n.grad;
      n.backward(*this, g);
    }
    return disconnected;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  static void check_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw NumericalError(std::string("non-finite ") + what + " tensor");
  }

  Var push(Tensor value, std::vector<std::size_t> inputs, Backward bw, Parameter* p, bool needs) {
    nodes_.push_back(Node{std::move(value), Tensor(), std::move(inputs), std::move(bw), p, needs});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::size_t current_ = 0;
};

inline const Tensor& Var::value() const { return graph->value(*this); }

namespace ad {

namespace detail {

inline void require_same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw std::invalid_argument("operands on different graphs");
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

template <class Fn, class Deriv>
Var unary(Var a, Fn fn, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
  return a.graph->record(std::move(out), {a}, [deriv](Graph& g, const Tensor& og) {
    const Tensor& xin = g.input_value(0);
    Tensor gi(og.rows(), og.cols());
    for (std::size_t i = 0; i < og.size(); ++i) gi[i] = og[i] * deriv(xin[i]);
    g.accumulate(0, gi);
  });
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::require_same_graph(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + A.shape_string() + " x " + B.shape_string());
  }
  Tensor out(A.rows(), B.cols());
  out.mat().noalias() = A.mat() * B.mat();
  return a.graph->record(std::move(out), {a, b}, [](Graph& g, const Tensor& og) {
    const Tensor& A = g.input_value(0);
    const Tensor& B = g.input_value(1);
    if (g.input_needs_grad(0)) {
      Tensor ga(A.rows(), A.cols());
      ga.mat().noalias() = og.mat() * B.mat().transpose();
      g.accumulate(0, ga);
    }
    if (g.input_needs_grad(1)) {
      Tensor gb(B.rows(), B.cols());
      gb.mat().noalias() = A.mat().transpose() * og.mat();
      g.accumulate(1, gb);
    }
  });
}

// a (n x m) + row (1 x m), broadcast over rows.
inline Var add_row(Var a, Var row) {
  detail::require_same_graph(a, row);
  const Tensor& A = a.value();
  const Tensor& r = row.value();
  if (r.rows() != 1 || r.cols() != A.cols()) {
    throw ShapeError("add_row: expected (1x" + std::to_string(A.cols()) + ") row, got " + r.shape_string());
  }
  Tensor out = A;
  out.mat().rowwise() += r.mat().row(0);
  return a.graph->record(std::move(out), {a, row}, [](Graph& g, const Tensor& og) {
    g.accumulate(0, og);
    if (g.input_needs_grad(1)) {
      Tensor gr(1, og.cols());
      gr.mat() = og.mat().colwise().sum();
      g.accumulate(1, gr);
    }
  });
}

inline Var add(Var a, Var b) {
  detail::require_same_graph(a, b);
  detail::require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out.mat() += b.value().mat();
  return a.graph->record(std::move(out), {a, b}, [](Graph& g, const Tensor& og) {
    g.accumulate(0, og);
    g.accumulate(1, og);
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_graph(a, b);
  detail::require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  out.mat() -= b.value().mat();
  return a.graph->record(std::move(out), {a, b}, [](Graph& g, const Tensor& og) {
    g.accumulate(0, og);
    if (g.input_needs_grad(1)) {
      Tensor neg = og;
      neg.mat() *= -1.0;
      g.accumulate(1, neg);
    }
  });
}

// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::require_same_graph(a, b);
  detail::require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  out.mat().array() *= b.value().mat().array();
  return a.graph->record(std::move(out), {a, b}, [](Graph& g, const Tensor& og) {
    if (g.input_needs_grad(0)) {
      Tensor ga = og;
      ga.mat().array() *= g.input_value(1).mat().array();
      g.accumulate(0, ga);
    }
    if (g.input_needs_grad(1)) {
      Tensor gb = og;
      gb.mat().array() *= g.input_value(0).mat().array();
      g.accumulate(1, gb);
    }
  });
}

inline Var scale(Var a, double c) {
  Tensor out = a.value();
  out.mat() *= c;
  return a.graph->record(std::move(out), {a}, [c](Graph& g, const Tensor& og) {
    Tensor ga = og;
    ga.mat() *= c;
    g.accumulate(0, ga);
  });
}

inline Var add_scalar(Var a, double c) {
  Tensor out = a.value();
  out.mat().array() += c;
  return a.graph->record(std::move(out), {a}, [](Graph& g, const Tensor& og) { g.accumulate(0, og); });
}

inline Var leaky_relu(Var a, double slope = 0.01) {
  return detail::unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

inline Var relu(Var a) { return leaky_relu(a, 0.0); }

inline Var tanh(Var a) {
  return detail::unary(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
  return detail::unary(
      a, [](double x) { return sigmoid_scalar(x); },
      [](double x) {
        const double s = sigmoid_scalar(x);
        return s * (1.0 - s);
      });
}

inline Var exp(Var a) {
  return detail::unary(
      a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

// Subgradient 0 at the kink.
inline Var abs(Var a) {
  return detail::unary(
      a, [](double x) { return std::abs(x); }, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

// Clamp with zero gradient outside [lo, hi].
inline Var clamp(Var a, double lo, double hi) {
  return detail::unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

inline Var sum(Var a) {
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  return a.graph->record(Tensor::scalar(x.mat().sum()), {a}, [r, c](Graph& g, const Tensor& og) {
    g.accumulate(0, Tensor(r, c, og.item()));
  });
}

inline Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Graph* graph = parts.front().graph;
  std::vector<const Tensor*> vals;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.graph != graph) throw std::invalid_argument("concat_cols: operands on different graphs");
    vals.push_back(&p.value());
    widths.push_back(p.value().cols());
  }
  Tensor out = hconcat(vals);
  return graph->record(std::move(out), parts, [widths](Graph& g, const Tensor& og) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (g.input_needs_grad(k)) g.accumulate(k, og.col_block(off, off + widths[k]));
      off += widths[k];
    }
  });
}

inline Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  Tensor out = x.col_block(begin, end);
  const std::size_t rows = x.rows(), cols = x.cols();
  return a.graph->record(std::move(out), {a}, [rows, cols, begin](Graph& g, const Tensor& og) {
    Tensor ga(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < og.cols(); ++c) ga(r, begin + c) = og(r, c);
    }
    g.accumulate(0, ga);
  });
}

// Column-wise (x - mean) / sqrt(var + eps) with biased batch variance.
inline Var standardize_cols(Var a, double eps = 1e-8) {
  const Tensor& x = a.value();
  const std::size_t n = x.rows(), m = x.cols();
  if (n == 0) throw ShapeError("standardize_cols: empty batch");
  Tensor out(n, m);
  std::vector<double> inv_sd(m);
  for (std::size_t c = 0; c < m; ++c) {
    double mu = 0.0;
    for (std::size_t r = 0; r < n; ++r) mu += x(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= static_cast<double>(n);
    inv_sd[c] = 1.0 / std::sqrt(var + eps);
    for (std::size_t r = 0; r < n; ++r) out(r, c) = (x(r, c) - mu) * inv_sd[c];
  }
  Tensor y = out;
  return a.graph->record(std::move(out), {a}, [y = std::move(y), inv_sd](Graph& g, const Tensor& og) {
    const std::size_t n = y.rows(), m = y.cols();
    Tensor gx(n, m);
    for (std::size_t c = 0; c < m; ++c) {
      double mg = 0.0, mgy = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        mg += og(r, c);
        mgy += og(r, c) * y(r, c);
      }
      mg /= static_cast<double>(n);
      mgy /= static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) gx(r, c) = inv_sd[c] * (og(r, c) - mg - y(r, c) * mgy);
    }
    g.accumulate(0, gx);
  });
}

// Batch mean of the Bernoulli negative log-likelihood of `targets` under
// `logits` (n x 1 each).
inline Var bce_with_logits(Var logits, const Tensor& targets) {
  const Tensor& l = logits.value();
  detail::require_same_shape(l, targets, "bce_with_logits");
  const std::size_t n = l.size();
  if (n == 0) throw ShapeError("bce_with_logits: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = l[i];
    total += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return logits.graph->record(Tensor::scalar(total / static_cast<double>(n)), {logits},
                              [targets](Graph& g, const Tensor& og) {
                                const Tensor& l = g.input_value(0);
                                const double k = og.item() / static_cast<double>(l.size());
                                Tensor gl(l.rows(), l.cols());
                                for (std::size_t i = 0; i < l.size(); ++i) {
                                  gl[i] = k * (sigmoid_scalar(l[i]) - targets[i]);
                                }
                                g.accumulate(0, gl);
                              });
}

// Batch mean of softmax cross-entropy. Rows whose one-hot target is all
// zero contribute nothing.
inline Var softmax_xent(Var logits, const Tensor& onehot) {
  const Tensor& l = logits.value();
  detail::require_same_shape(l, onehot, "softmax_xent");
  const std::size_t n = l.rows(), k = l.cols();
  if (n == 0) throw ShapeError("softmax_xent: empty batch");
  Tensor probs(n, k);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double mx = l(r, 0);
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, l(r, c));
    double se = 0.0;
    for (std::size_t c = 0; c < k; ++c) se += std::exp(l(r, c) - mx);
    const double lse = mx + std::log(se);
    for (std::size_t c = 0; c < k; ++c) {
      probs(r, c) = std::exp(l(r, c) - lse);
      total -= onehot(r, c) * (l(r, c) - lse);
    }
  }
  return logits.graph->record(Tensor::scalar(total / static_cast<double>(n)), {logits},
                              [probs = std::move(probs), onehot](Graph& g, const Tensor& og) {
                                const std::size_t n = probs.rows(), k = probs.cols();
                                const double s = og.item() / static_cast<double>(n);
                                Tensor gl(n, k);
                                for (std::size_t r = 0; r < n; ++r) {
                                  double tsum = 0.0;
                                  for (std::size_t c = 0; c < k; ++c) tsum += onehot(r, c);
                                  for (std::size_t c = 0; c < k; ++c) {
                                    gl(r, c) = s * (tsum * probs(r, c) - onehot(r, c));
                                  }
                                }
                                g.accumulate(0, gl);
                              });
}

// Batch mean over rows of sum_j (pred - target)^2 / 2.
inline Var half_squared_error(Var pred, const Tensor& target) {
  const Tensor& p = pred.value();
  detail::require_same_shape(p, target, "half_squared_error");
  const std::size_t n = p.rows();
  if (n == 0) throw ShapeError("half_squared_error: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += 0.5 * (p[i] - target[i]) * (p[i] - target[i]);
  return pred.graph->record(Tensor::scalar(total / static_cast<double>(n)), {pred},
                            [target](Graph& g, const Tensor& og) {
                              const Tensor& p = g.input_value(0);
                              const double s = og.item() / static_cast<double>(p.rows());
                              Tensor gp(p.rows(), p.cols());
                              for (std::size_t i = 0; i < p.size(); ++i) gp[i] = s * (p[i] - target[i]);
                              g.accumulate(0, gp);
                            });
}

}  // namespace ad

inline Var operator+(Var a, Var b) { return ad::add(a, b); }
inline Var operator-(Var a, Var b) { return ad::sub(a, b); }
inline Var operator*(Var a, Var b) { return ad::mul(a, b); }
inline Var operator*(double c, Var a) { return ad::scale(a, c); }

}  // namespace fairproxy
