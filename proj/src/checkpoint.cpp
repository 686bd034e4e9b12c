#include "mrpd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mrpd/binary_io.hpp"

namespace mrpd::checkpoint {

void write(std::ostream& out, const std::vector<Entry>& entries) {
  BinaryWriter w(out);
  w.bytes(kMagic, sizeof kMagic);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (static_cast<Index>(e.data.size()) != shape_size(e.shape))
      throw DimensionError("checkpoint entry '" + e.name + "' payload does not match shape " + shape_string(e.shape));
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.u8(kDtypeF32);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (Index d : e.shape) w.u32(static_cast<std::uint32_t>(d));
    w.f32s(e.data);
  }
}

std::vector<Entry> read(std::istream& in) {
  BinaryReader r(in);
  char magic[4];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError("bad checkpoint magic", 0);
  const auto version_offset = r.offset();
  if (r.u16("version") != kVersion) throw FormatError("unsupported checkpoint version", version_offset);
  const std::uint32_t count = r.u32("tensor count");
  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const std::uint32_t len = r.u32("name length");
    e.name.resize(len);
    r.bytes(e.name.data(), len, "name");
    const auto dtype_offset = r.offset();
    if (r.u8("dtype") != kDtypeF32) throw FormatError("unsupported dtype for '" + e.name + "'", dtype_offset);
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 8) throw FormatError("implausible rank for '" + e.name + "'", r.offset() - 4);
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.u32("dim");
      if (d == 0) throw FormatError("zero dimension in '" + e.name + "'", r.offset() - 4);
      e.shape.push_back(d);
    }
    e.data.resize(static_cast<std::size_t>(shape_size(e.shape)));
    r.f32s(e.data, "payload of '" + e.name + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

void save(const std::filesystem::path& path, const std::vector<Entry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write(out, entries);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Entry> load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read(in);
}

}  // namespace mrpd::checkpoint
