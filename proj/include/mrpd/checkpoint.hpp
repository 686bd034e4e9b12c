#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mrpd/tensor.hpp"

namespace mrpd {

/// Binary tensor archive: "MRPD", u16 version, u32 count, then per tensor
/// u32 name length, name bytes, u8 dtype (0 = f32), u32 rank, u32 dims, f32 payload. All little-endian.
namespace checkpoint {

inline constexpr char kMagic[4] = {'M', 'R', 'P', 'D'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

struct Entry {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

void write(std::ostream& out, const std::vector<Entry>& entries);
std::vector<Entry> read(std::istream& in);

void save(const std::filesystem::path& path, const std::vector<Entry>& entries);
std::vector<Entry> load(const std::filesystem::path& path);

template <typename Scalar>
std::vector<Entry> to_entries(const ParameterList<Scalar>& params) {
  std::vector<Entry> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    Entry e{p.name, p.tensor.shape(), {}};
    e.data.resize(static_cast<std::size_t>(p.tensor.size()));
    for (Index i = 0; i < p.tensor.size(); ++i) e.data[static_cast<std::size_t>(i)] = float(p.tensor.values()[i]);
    out.push_back(std::move(e));
  }
  return out;
}

/// Copies entries into same-named parameters; every parameter must be present with its exact shape.
template <typename Scalar>
void assign(const ParameterList<Scalar>& params, const std::vector<Entry>& entries) {
  for (const auto& p : params) {
    const Entry* match = nullptr;
    for (const auto& e : entries)
      if (e.name == p.name) match = &e;
    if (!match) throw ValidationError("checkpoint has no tensor named '" + p.name + "'");
    if (match->shape != p.tensor.shape())
      throw DimensionError("checkpoint tensor '" + p.name + "' has shape " + shape_string(match->shape) +
                           ", model expects " + shape_string(p.tensor.shape()));
    Tensor<Scalar> t = p.tensor;
    for (Index i = 0; i < t.size(); ++i) t.values()[i] = Scalar(match->data[static_cast<std::size_t>(i)]);
  }
}

}  // namespace checkpoint
}  // namespace mrpd
