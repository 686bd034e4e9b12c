#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mrpd/errors.hpp"

namespace mrpd {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { bytes(&v, 2); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void f32s(const float* data, std::size_t n) { bytes(data, n * sizeof(float)); }
  void f32s(const std::vector<float>& v) { f32s(v.data(), v.size()); }

 private:
  std::ostream& out_;
};

/// Reads little-endian fields and reports truncation with the byte offset and an optional record id.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in, std::string record = {}) : in_(in), record_(std::move(record)) {}

  std::uint64_t offset() const { return offset_; }

  void bytes(void* data, std::size_t n, const std::string& what) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::uint64_t>(in_.gcount());
    if (got != n) throw FormatError("truncated input while reading " + what, offset_ + got, record_);
    offset_ += n;
  }
  std::uint8_t u8(const std::string& what) { return read<std::uint8_t>(what); }
  std::uint16_t u16(const std::string& what) { return read<std::uint16_t>(what); }
  std::uint32_t u32(const std::string& what) { return read<std::uint32_t>(what); }
  float f32(const std::string& what) { return read<float>(what); }
  double f64(const std::string& what) { return read<double>(what); }
  void f32s(float* data, std::size_t n, const std::string& what) { bytes(data, n * sizeof(float), what); }
  void f32s(std::vector<float>& v, const std::string& what) { f32s(v.data(), v.size(), what); }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  template <typename T>
  T read(const std::string& what) {
    T v{};
    bytes(&v, sizeof v, what);
    return v;
  }

  std::istream& in_;
  std::string record_;
  std::uint64_t offset_ = 0;
};

}  // namespace mrpd
