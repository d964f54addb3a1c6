#pragma once

// Per-row banks of sampled proxies.
//   "FPLZ1" | u64 n_rows | u64 k | u64 d_z | f64 payload[n_rows][k][d_z]
// plus a CSV sidecar: row_id, mu_0..mu_{d-1}, sigma_0..sigma_{d-1}.

#include "fairproxy/binary_io.hpp"
#include "fairproxy/tensor.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace fairproxy {

inline constexpr const char* kLatentMagic = "FPLZ1";

class ProxyBank {
 public:
  ProxyBank() = default;
  ProxyBank(std::size_t n_rows, std::size_t k, std::size_t d_z)
      : n_(n_rows), k_(k), d_(d_z), data_(n_rows * k * d_z, 0.0) {
    if (k == 0 || d_z == 0) throw ShapeError("ProxyBank: k and d_z must be positive");
  }

  std::size_t rows() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t d_z() const { return d_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& at(std::size_t row, std::size_t sample, std::size_t dim) { return data_[(row * k_ + sample) * d_ + dim]; }
  double at(std::size_t row, std::size_t sample, std::size_t dim) const { return data_[(row * k_ + sample) * d_ + dim]; }

  // One uniformly drawn sample per requested row.
  Tensor draw(const std::vector<std::size_t>& rows, std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, k_ - 1);
    Tensor z(rows.size(), d_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= n_) throw ShapeError("ProxyBank: row index out of range");
      const std::size_t s = pick(rng);
      for (std::size_t d = 0; d < d_; ++d) z(i, d) = at(rows[i], s, d);
    }
    return z;
  }

  Tensor sample_slice(std::size_t sample) const {
    Tensor z(n_, d_);
    for (std::size_t r = 0; r < n_; ++r) {
      for (std::size_t d = 0; d < d_; ++d) z(r, d) = at(r, sample, d);
    }
    return z;
  }

  void write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open latent bank for writing: " + path);
    bin::put_magic(os, kLatentMagic);
    bin::put_uint<std::uint64_t>(os, n_);
    bin::put_uint<std::uint64_t>(os, k_);
    bin::put_uint<std::uint64_t>(os, d_);
    for (double v : data_) bin::put_f64(os, v);
    if (!os) throw std::runtime_error("failed writing latent bank: " + path);
  }

  static ProxyBank read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open latent bank: " + path);
    bin::expect_magic(is, kLatentMagic);
    const auto n = bin::get_uint<std::uint64_t>(is);
    const auto k = bin::get_uint<std::uint64_t>(is);
    const auto d = bin::get_uint<std::uint64_t>(is);
    if (k == 0 || d == 0) throw bin::FormatError("latent bank header has zero k or d_z");
    ProxyBank bank(n, k, d);
    for (auto& v : bank.data_) v = bin::get_f64(is);
    if (is.peek() != std::char_traits<char>::eof()) throw bin::FormatError("trailing bytes after latent payload");
    return bank;
  }

 private:
  std::size_t n_ = 0, k_ = 0, d_ = 0;
  std::vector<double> data_;
};

inline void write_posterior_csv(const std::string& path, const std::vector<std::size_t>& row_ids, const Tensor& mu,
                                const Tensor& sigma) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open posterior sidecar: " + path);
  os << "row_id";
  for (std::size_t d = 0; d < mu.cols(); ++d) os << ",mu_" << d;
  for (std::size_t d = 0; d < sigma.cols(); ++d) os << ",sigma_" << d;
  os << '\n';
  char buf[40];
  for (std::size_t r = 0; r < mu.rows(); ++r) {
    os << row_ids.at(r);
    for (std::size_t d = 0; d < mu.cols(); ++d) {
      std::snprintf(buf, sizeof buf, ",%.17g", mu(r, d));
      os << buf;
    }
    for (std::size_t d = 0; d < sigma.cols(); ++d) {
      std::snprintf(buf, sizeof buf, ",%.17g", sigma(r, d));
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace fairproxy
