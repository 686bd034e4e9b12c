#include "mrpd/image_io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace mrpd {

void write_pgm(std::ostream& out, const ImageF& img) {
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(img.size()));
  for (Eigen::Index i = 0; i < img.size(); ++i)
    bytes[std::size_t(i)] = static_cast<unsigned char>(std::clamp(std::lround(img.data()[i]), 0L, 255L));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_pgm(const std::filesystem::path& path, const ImageF& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_pgm(out, img);
}

ImageF read_pgm(std::istream& in) {
  auto token = [&in]() {
    std::string t;
    while (in >> std::ws && in.peek() == '#') std::getline(in, t);
    in >> t;
    return t;
  };
  if (token() != "P5") throw FormatError("not a binary PGM", 0);
  long w = 0, h = 0, maxval = 0;
  try {
    w = std::stol(token());
    h = std::stol(token());
    maxval = std::stol(token());
  } catch (const std::exception&) {
    throw FormatError("malformed PGM header", 0);
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw FormatError("unsupported PGM geometry or depth", 0);
  in.get();  // single whitespace before the raster
  const auto header = static_cast<std::uint64_t>(in.tellg());
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w * h));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw FormatError("truncated PGM raster", header + static_cast<std::uint64_t>(in.gcount()));
  ImageF img(h, w);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = float(bytes[std::size_t(i)]);
  return img;
}

ImageF read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  return read_pgm(in);
}

void write_image_csv(std::ostream& out, const ImageF& img) {
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.cols(); ++c) out << (c ? "," : "") << img(r, c);
    out << '\n';
  }
}

ImageF grayscale_from_depth(const ImageF& depth) {
  return depth.unaryExpr([](float d) { return d > 0.f ? 255.f * (1.f - depth_to_unit(d)) : 0.f; });
}

ImageF sad_image(std::span<const ImageF> frames, int span) {
  if (span < 2) throw ValidationError("SAD span must cover at least two frames");
  if (frames.size() < 2) throw ValidationError("SAD needs at least two frames, got " + std::to_string(frames.size()));
  const std::size_t n = std::min(frames.size(), std::size_t(span));
  ImageF acc = ImageF::Zero(frames[0].rows(), frames[0].cols());
  for (std::size_t t = 1; t < n; ++t) {
    if (frames[t].rows() != acc.rows() || frames[t].cols() != acc.cols())
      throw DimensionError("SAD frames differ in size");
    acc += (frames[t] - frames[t - 1]).cwiseAbs();
  }
  const float lo = acc.minCoeff(), hi = acc.maxCoeff();
  if (!(hi > lo)) return ImageF::Zero(acc.rows(), acc.cols());
  return ((acc.array() - lo) * (255.f / (hi - lo))).matrix();
}

}  // namespace mrpd
