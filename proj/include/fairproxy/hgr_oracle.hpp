#pragma once

// Exact HGR of a pair of finite-alphabet variables. With
//   Q(i,j) = p(i,j) / sqrt(p_i p_j)
// the leading singular value of Q is 1 (vector sqrt(p)), and the second
// largest singular value is the maximal correlation.

#include "fairproxy/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace fairproxy {

struct PmfError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class DiscreteJoint {
 public:
  // Validates a probability table: non-negative, unit mass, no empty row
  // or column.
  explicit DiscreteJoint(Tensor pmf) : pmf_(std::move(pmf)) {
    if (pmf_.empty()) throw PmfError("empty pmf");
    double total = 0.0;
    for (double p : pmf_.data()) {
      if (!std::isfinite(p) || p < 0.0) throw PmfError("pmf entries must be finite and non-negative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw PmfError("pmf must sum to 1, got " + std::to_string(total));
    row_.assign(pmf_.rows(), 0.0);
    col_.assign(pmf_.cols(), 0.0);
    for (std::size_t i = 0; i < pmf_.rows(); ++i) {
      for (std::size_t j = 0; j < pmf_.cols(); ++j) {
        row_[i] += pmf_(i, j);
        col_[j] += pmf_(i, j);
      }
    }
    for (double m : row_) {
      if (m <= 0.0) throw PmfError("zero row marginal");
    }
    for (double m : col_) {
      if (m <= 0.0) throw PmfError("zero column marginal");
    }
  }

  // Normalizes non-negative counts/weights into a joint.
  static DiscreteJoint from_counts(const Tensor& counts) {
    double total = 0.0;
    for (double c : counts.data()) total += c;
    if (!(total > 0.0)) throw PmfError("counts sum to zero");
    Tensor p = counts;
    for (double& v : p.data()) v /= total;
    // Renormalize once more so the unit-mass check is tight.
    double t2 = std::accumulate(p.data().begin(), p.data().end(), 0.0);
    for (double& v : p.data()) v /= t2;
    return DiscreteJoint(std::move(p));
  }

  const Tensor& pmf() const { return pmf_; }
  const std::vector<double>& row_marginal() const { return row_; }
  const std::vector<double>& col_marginal() const { return col_; }

  Tensor q_matrix() const {
    Tensor q(pmf_.rows(), pmf_.cols());
    for (std::size_t i = 0; i < q.rows(); ++i) {
      for (std::size_t j = 0; j < q.cols(); ++j) q(i, j) = pmf_(i, j) / std::sqrt(row_[i] * col_[j]);
    }
    return q;
  }

 private:
  Tensor pmf_;
  std::vector<double> row_, col_;
};

// Singular values (descending) by one-sided Jacobi rotations on columns.
inline std::vector<double> jacobi_singular_values(Tensor a, double tol = 1e-15, int max_sweeps = 100) {
  if (a.rows() < a.cols()) {
    Tensor t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    }
    a = std::move(t);
  }
  const std::size_t m = a.rows(), n = a.cols();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          alpha += a(r, i) * a(r, i);
          beta += a(r, j) * a(r, j);
          gamma += a(r, i) * a(r, j);
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < m; ++r) {
          const double ai = a(r, i), aj = a(r, j);
          a(r, i) = c * ai - s * aj;
          a(r, j) = s * ai + c * aj;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < m; ++r) s += a(r, j) * a(r, j);
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

inline double hgr_oracle(const DiscreteJoint& joint) {
  const auto sv = jacobi_singular_values(joint.q_matrix());
  if (sv.size() < 2) return 0.0;
  return std::clamp(sv[1], 0.0, 1.0);
}

// Joint pmf over three finite variables (Yhat, S, Z'), stored as
// p[(a * dim_s + b) * dim_z + c].
class Joint3 {
 public:
  Joint3(std::size_t dim_y, std::size_t dim_s, std::size_t dim_z, std::vector<double> p)
      : dy_(dim_y), ds_(dim_s), dz_(dim_z), p_(std::move(p)) {
    if (p_.size() != dy_ * ds_ * dz_) throw PmfError("Joint3: table size does not match dimensions");
    double total = 0.0;
    for (double v : p_) {
      if (!std::isfinite(v) || v < 0.0) throw PmfError("Joint3: entries must be finite and non-negative");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) throw PmfError("Joint3: pmf must sum to 1");
  }

  double operator()(std::size_t a, std::size_t b, std::size_t c) const { return p_[(a * ds_ + b) * dz_ + c]; }
  std::size_t dim_y() const { return dy_; }
  std::size_t dim_s() const { return ds_; }
  std::size_t dim_z() const { return dz_; }

  // Yhat against the flattened pair (S, Z'); zero-mass pairs are dropped.
  DiscreteJoint y_vs_sz() const {
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < ds_ * dz_; ++k) {
      double m = 0.0;
      for (std::size_t a = 0; a < dy_; ++a) m += p_[a * ds_ * dz_ + k];
      if (m > 0.0) keep.push_back(k);
    }
    Tensor t(dy_, keep.size());
    for (std::size_t a = 0; a < dy_; ++a) {
      for (std::size_t k = 0; k < keep.size(); ++k) t(a, k) = p_[a * ds_ * dz_ + keep[k]];
    }
    return DiscreteJoint::from_counts(t);
  }

  // Yhat against S with Z' summed out.
  DiscreteJoint y_vs_s() const {
    Tensor t(dy_, ds_);
    for (std::size_t a = 0; a < dy_; ++a) {
      for (std::size_t b = 0; b < ds_; ++b) {
        for (std::size_t c = 0; c < dz_; ++c) t(a, b) += (*this)(a, b, c);
      }
    }
    return DiscreteJoint::from_counts(t);
  }

 private:
  std::size_t dy_, ds_, dz_;
  std::vector<double> p_;
};

struct Theorem1Result {
  double hgr_full = 0.0;
  double hgr_sub = 0.0;
  bool holds = false;
};

// Conditioning on a superset of variables can only increase the maximal
// correlation: HGR(Yhat, (S, Z')) >= HGR(Yhat, S).
inline Theorem1Result theorem1_check(const Joint3& joint) {
  Theorem1Result r;
  r.hgr_full = hgr_oracle(joint.y_vs_sz());
  r.hgr_sub = hgr_oracle(joint.y_vs_s());
  r.holds = r.hgr_full >= r.hgr_sub - 1e-9;
  return r;
}

// Equal-frequency bin codes in [0, bins). Ties share a bin.
inline std::vector<std::size_t> quantile_codes(const std::vector<double>& values, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("quantile_codes: bins must be positive");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<std::size_t> codes(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const std::size_t code = std::min(bins - 1, i * bins / std::max<std::size_t>(n, 1));
    for (std::size_t k = i; k < j; ++k) codes[order[k]] = code;
    i = j;
  }
  return codes;
}

// Empirical joint of two code vectors; empty categories are dropped.
inline DiscreteJoint empirical_joint(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size() || a.empty()) throw PmfError("empirical_joint: code vectors must be equal and non-empty");
  const std::size_t ka = *std::max_element(a.begin(), a.end()) + 1;
  const std::size_t kb = *std::max_element(b.begin(), b.end()) + 1;
  Tensor counts(ka, kb);
  for (std::size_t i = 0; i < a.size(); ++i) counts(a[i], b[i]) += 1.0;
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < ka; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < kb; ++j) m += counts(i, j);
    if (m > 0.0) rows.push_back(i);
  }
  for (std::size_t j = 0; j < kb; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < ka; ++i) m += counts(i, j);
    if (m > 0.0) cols.push_back(j);
  }
  Tensor packed(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) packed(i, j) = counts(rows[i], cols[j]);
  }
  return DiscreteJoint::from_counts(packed);
}

}  // namespace fairproxy
