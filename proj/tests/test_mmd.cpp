#include "fairproxy/mmd.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace fairproxy;
namespace ft = fairproxy::testing;

namespace {

// Direct double-precision U-statistic, kept independent of the fixed-point path.
double reference_mmd2(const Tensor& x, const Tensor& y, const std::vector<double>& bw) {
  auto k = [&](const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    double d = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) d += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
    double s = 0.0;
    for (double h : bw) s += std::exp(-d / (2.0 * h * h));
    return s;
  };
  const double n = static_cast<double>(x.rows()), m = static_cast<double>(y.rows());
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.rows(); ++j) {
      if (i != j) kxx += k(x, i, x, j);
    }
  }
  for (std::size_t i = 0; i < y.rows(); ++i) {
    for (std::size_t j = 0; j < y.rows(); ++j) {
      if (i != j) kyy += k(y, i, y, j);
    }
  }
  const bool paired = x.rows() == y.rows();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < y.rows(); ++j) {
      if (!(paired && i == j)) kxy += k(x, i, y, j);
    }
  }
  return kxx / (n * (n - 1)) + kyy / (m * (m - 1)) - 2.0 * kxy / (paired ? n * (n - 1) : n * m);
}

Tensor shifted_normal(std::size_t n, double shift, std::mt19937_64& rng) {
  Tensor t = ft::random_tensor(n, 1, rng);
  for (auto& v : t.data()) v += shift;
  return t;
}

}  // namespace

TEST(Mmd, MatchesDirectFormula) {
  std::mt19937_64 rng(1);
  Tensor x = ft::random_tensor(30, 3, rng), y = ft::random_tensor(25, 3, rng, 1.5);
  const MmdConfig cfg{{0.5, 1.0, 2.0}};
  EXPECT_NEAR(mmd2_value(x, y, cfg), reference_mmd2(x, y, cfg.bandwidths), 1e-12);
}

TEST(Mmd, EqualSizeFormMatchesDirectFormula) {
  std::mt19937_64 rng(5);
  Tensor x = ft::random_tensor(20, 2, rng), y = ft::random_tensor(20, 2, rng, 2.0);
  EXPECT_NEAR(mmd2_value(x, y, MmdConfig{{1.0, 3.0}}), reference_mmd2(x, y, {1.0, 3.0}), 1e-12);
}

TEST(Mmd, IdenticalSetsAreNearZero) {
  std::mt19937_64 rng(2);
  Tensor x = ft::random_tensor(200, 2, rng);
  EXPECT_LE(std::abs(mmd2_value(x, x, MmdConfig{{1.0}})), 1e-6);
}

TEST(Mmd, ExactlySymmetricAndPermutationInvariant) {
  std::mt19937_64 rng(3);
  Tensor x = ft::random_tensor(50, 4, rng), y = ft::random_tensor(40, 4, rng);
  const MmdConfig cfg{{0.5, 1.0, 2.0, 4.0}};
  const double v = mmd2_value(x, y, cfg);
  EXPECT_EQ(v, mmd2_value(y, x, cfg));
  std::vector<std::size_t> perm(x.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  EXPECT_EQ(v, mmd2_value(x.gather_rows(perm), y, cfg));
}

TEST(Mmd, SeparatedDistributionsExceedMatchedOnes) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(100 + seed);
    Tensor a = shifted_normal(500, 0.0, rng), b = shifted_normal(500, 3.0, rng), c = shifted_normal(500, 0.0, rng);
    const double far = mmd2_value(a, b, MmdConfig{{1.0}}), near = mmd2_value(a, c, MmdConfig{{1.0}});
    EXPECT_GT(far, 0.0) << seed;
    EXPECT_GT(far, near) << seed;
  }
}

TEST(Mmd, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  ParamSet ps("m");
  ps.add("x", ft::random_tensor(7, 2, rng));
  ps.add("y", ft::random_tensor(6, 2, rng));
  ps.add("w", ft::random_tensor(7, 2, rng, 1.5));
  const MmdConfig cfg{{0.7, 1.3}};
  for (std::size_t other : {1u, 2u}) {  // unequal, then equal sizes
    auto loss = [&] { return reference_mmd2(ps[0].value, ps[other].value, cfg.bandwidths); };
    auto analytic = [&] {
      Graph g;
      g.backward(mmd2(g.param(ps[0]), g.param(ps[other]), cfg));
    };
    EXPECT_LT(ft::max_fd_relative_error(ps, loss, analytic), 1e-4) << other;
  }
}

TEST(Mmd, RejectsBadInputs) {
  EXPECT_ANY_THROW(mmd2_value(Tensor(5, 2), Tensor(5, 3), MmdConfig{{1.0}}));
  EXPECT_ANY_THROW(mmd2_value(Tensor(1, 2), Tensor(5, 2), MmdConfig{{1.0}}));
  EXPECT_ANY_THROW(mmd2_value(Tensor(5, 2), Tensor(5, 2), MmdConfig{{}}));
  EXPECT_ANY_THROW(mmd2_value(Tensor(5, 2), Tensor(5, 2), MmdConfig{{-1.0}}));
}

TEST(Mmd, MedianHeuristic) {
  Tensor x{{0.0}, {1.0}, {3.0}};  // distances 1, 2, 3
  EXPECT_DOUBLE_EQ(median_pairwise_distance(x), 2.0);
  const auto bw = median_heuristic_bandwidths(x, {0.5, 1.0, 2.0, 4.0});
  EXPECT_EQ(bw, (std::vector<double>{1.0, 2.0, 4.0, 8.0}));
}
