#pragma once

// Flat parameter checkpoints:
//   "FPRX1" | u32 version | records until EOF
//   record = u32 name_len | name | u32 rank | u64 dims[rank] | f64 payload

#include "fairproxy/autodiff.hpp"
#include "fairproxy/binary_io.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace fairproxy {

inline constexpr const char* kCheckpointMagic = "FPRX1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

inline void write_checkpoint(std::ostream& os, const std::vector<const ParamSet*>& sets) {
  bin::put_magic(os, kCheckpointMagic);
  bin::put_uint<std::uint32_t>(os, kCheckpointVersion);
  for (const ParamSet* set : sets) {
    for (const auto& p : *set) {
      bin::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
      os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      bin::put_uint<std::uint32_t>(os, 2);
      bin::put_uint<std::uint64_t>(os, p.value.rows());
      bin::put_uint<std::uint64_t>(os, p.value.cols());
      for (double v : p.value.data()) bin::put_f64(os, v);
    }
  }
}

inline void write_checkpoint(const std::string& path, const std::vector<const ParamSet*>& sets) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  write_checkpoint(os, sets);
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

inline std::vector<NamedTensor> read_checkpoint(std::istream& is) {
  bin::expect_magic(is, kCheckpointMagic);
  const auto version = bin::get_uint<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw bin::FormatError("unsupported checkpoint version " + std::to_string(version));
  std::vector<NamedTensor> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    const auto len = bin::get_uint<std::uint32_t>(is);
    if (len > 4096) throw bin::FormatError("implausible parameter name length");
    std::string name(len, '\0');
    is.read(name.data(), len);
    const auto rank = bin::get_uint<std::uint32_t>(is);
    if (rank == 0 || rank > 2) throw bin::FormatError("unsupported rank for " + name);
    std::uint64_t rows = bin::get_uint<std::uint64_t>(is);
    std::uint64_t cols = rank == 2 ? bin::get_uint<std::uint64_t>(is) : 1;
    if (rank == 1) std::swap(rows, cols);  // vectors load as row vectors
    Tensor t(rows, cols);
    for (auto& v : t.data()) v = bin::get_f64(is);
    out.push_back({std::move(name), std::move(t)});
  }
  return out;
}

inline std::vector<NamedTensor> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  return read_checkpoint(is);
}

// Copies matching records into `set`. Every parameter of the set must be
// present with the same shape.
inline void load_params(ParamSet& set, const std::vector<NamedTensor>& records) {
  for (auto& p : set) {
    const NamedTensor* hit = nullptr;
    for (const auto& r : records) {
      if (r.name == p.name) hit = &r;
    }
    if (!hit) throw bin::FormatError("checkpoint has no parameter " + p.name);
    if (!hit->value.same_shape(p.value)) {
      throw ShapeError("checkpoint shape " + hit->value.shape_string() + " for " + p.name + " does not match " +
                       p.value.shape_string());
    }
    p.value = hit->value;
    p.grad.fill(0.0);
  }
}

}  // namespace fairproxy
