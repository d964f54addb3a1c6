#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace fairproxy::bin {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Little-endian writers/readers, independent of host byte order.
template <class UInt>
void put_uint(std::ostream& os, UInt v) {
  std::array<char, sizeof(UInt)> b{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), b.size());
}

template <class UInt>
UInt get_uint(std::istream& is) {
  std::array<unsigned char, sizeof(UInt)> b{};
  is.read(reinterpret_cast<char*>(b.data()), b.size());
  if (!is) throw FormatError("unexpected end of file");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(b[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& os, double d) { put_uint<std::uint64_t>(os, std::bit_cast<std::uint64_t>(d)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_uint<std::uint64_t>(is)); }

inline void put_magic(std::ostream& os, const std::string& magic) { os.write(magic.data(), static_cast<std::streamsize>(magic.size())); }

inline void expect_magic(std::istream& is, const std::string& magic) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!is || got != magic) throw FormatError("bad magic: expected " + magic);
}

}  // namespace fairproxy::bin
