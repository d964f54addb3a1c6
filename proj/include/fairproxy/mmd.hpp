#pragma once

// Unbiased squared maximum mean discrepancy with a sum of RBF kernels
//   k(a, b) = exp(-|a - b|^2 / (2 s^2)).
//
// Kernel sums are accumulated in 128-bit fixed point (2^-60 resolution), so
// the value is independent of row order and exactly symmetric in (x, y).

#include "fairproxy/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace fairproxy {

struct MmdConfig {
  std::vector<double> bandwidths{1.0};
  std::size_t prior_sample_count = 512;
};

namespace detail {

inline constexpr double kFixedScale = 1152921504606846976.0;  // 2^60

inline double sq_dist(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double d = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    const double t = a(i, c) - b(j, c);
    d += t * t;
  }
  return d;
}

inline void check_mmd_inputs(const Tensor& x, const Tensor& y, const MmdConfig& cfg) {
  if (x.cols() != y.cols()) throw ShapeError("mmd2: feature dimensions differ " + x.shape_string() + " vs " + y.shape_string());
  if (x.rows() < 2 || y.rows() < 2) throw ShapeError("mmd2: need at least two rows per sample");
  if (cfg.bandwidths.empty()) throw std::invalid_argument("mmd2: no bandwidths");
  for (double s : cfg.bandwidths) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("mmd2: bandwidths must be positive");
  }
}

inline double fixed_to_double(__int128 v) { return static_cast<double>(static_cast<long double>(v) / kFixedScale); }

inline __int128 to_fixed(double k) { return static_cast<__int128>(std::llround(k * kFixedScale)); }

// Equal-size samples use the U-statistic that also drops i == j from the
// cross term, so identical sets give exactly 0. Otherwise the cross term
// averages over all n*m pairs.
inline bool paired_form(std::size_t n, std::size_t m) { return n == m; }

inline double cross_pairs(std::size_t n, std::size_t m) {
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return paired_form(n, m) ? nn * (nn - 1.0) : nn * mm;
}

}  // namespace detail

inline double mmd2_value(const Tensor& x, const Tensor& y, const MmdConfig& cfg) {
  detail::check_mmd_inputs(x, y, cfg);
  const std::size_t n = x.rows(), m = y.rows();
  std::vector<double> inv2s2;
  for (double s : cfg.bandwidths) inv2s2.push_back(1.0 / (2.0 * s * s));
  __int128 sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = detail::sq_dist(x, i, x, j);
      for (double c : inv2s2) sxx += detail::to_fixed(std::exp(-d * c));
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = detail::sq_dist(y, i, y, j);
      for (double c : inv2s2) syy += detail::to_fixed(std::exp(-d * c));
    }
  }
  const bool paired = detail::paired_form(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (paired && i == j) continue;
      const double d = detail::sq_dist(x, i, y, j);
      for (double c : inv2s2) sxy += detail::to_fixed(std::exp(-d * c));
    }
  }
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  const double txx = 2.0 * detail::fixed_to_double(sxx) / (nn * (nn - 1.0));
  const double tyy = 2.0 * detail::fixed_to_double(syy) / (mm * (mm - 1.0));
  const double txy = detail::fixed_to_double(sxy) / detail::cross_pairs(n, m);
  return (txx + tyy) - 2.0 * txy;
}

// Differentiable in both arguments (pass a constant for the prior sample).
inline Var mmd2(Var x, Var y, const MmdConfig& cfg) {
  if (x.graph != y.graph) throw std::invalid_argument("mmd2: operands on different graphs");
  const double value = mmd2_value(x.value(), y.value(), cfg);
  const std::vector<double> bw = cfg.bandwidths;
  return x.graph->record(Tensor::scalar(value), {x, y}, [bw](Graph& g, const Tensor& og) {
    const Tensor& X = g.input_value(0);
    const Tensor& Y = g.input_value(1);
    const std::size_t n = X.rows(), m = Y.rows(), d = X.cols();
    const double nn = static_cast<double>(n), mm = static_cast<double>(m);
    const double up = og.item();
    Tensor gx(n, d), gy(m, d);
    // dk/da = -k (a - b) / s^2
    auto kernel_weight = [&bw](double dist) {
      double w = 0.0;
      for (double s : bw) w += std::exp(-dist / (2.0 * s * s)) / (s * s);
      return w;
    };
    const double cxx = up * 2.0 / (nn * (nn - 1.0));
    const double cyy = up * 2.0 / (mm * (mm - 1.0));
    const double cxy = up * 2.0 / detail::cross_pairs(n, m);
    const bool paired = detail::paired_form(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double w = kernel_weight(detail::sq_dist(X, i, X, j)) * cxx;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = X(i, c) - X(j, c);
          gx(i, c) -= w * diff;
          gx(j, c) += w * diff;
        }
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        const double w = kernel_weight(detail::sq_dist(Y, i, Y, j)) * cyy;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = Y(i, c) - Y(j, c);
          gy(i, c) -= w * diff;
          gy(j, c) += w * diff;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (paired && i == j) continue;
        const double w = kernel_weight(detail::sq_dist(X, i, Y, j)) * cxy;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = X(i, c) - Y(j, c);
          gx(i, c) += w * diff;
          gy(j, c) -= w * diff;
        }
      }
    }
    if (g.input_needs_grad(0)) g.accumulate(0, gx);
    if (g.input_needs_grad(1)) g.accumulate(1, gy);
  });
}

inline double median_pairwise_distance(const Tensor& x) {
  std::vector<double> d;
  d.reserve(x.rows() * (x.rows() - 1) / 2);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i + 1; j < x.rows(); ++j) d.push_back(std::sqrt(detail::sq_dist(x, i, x, j)));
  }
  if (d.empty()) throw ShapeError("median_pairwise_distance: need at least two rows");
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

// Bandwidths = multipliers x median pairwise distance of `reference`.
inline std::vector<double> median_heuristic_bandwidths(const Tensor& reference, const std::vector<double>& multipliers) {
  double med = median_pairwise_distance(reference);
  if (!(med > 0.0)) med = 1.0;
  std::vector<double> out;
  for (double k : multipliers) out.push_back(k * med);
  return out;
}

}  // namespace fairproxy
