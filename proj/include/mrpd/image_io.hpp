#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>

#include "mrpd/data.hpp"

namespace mrpd {

/// Binary PGM (P5, maxval 255). Values are rounded and clamped to [0, 255].
void write_pgm(std::ostream& out, const ImageF& img);
void write_pgm(const std::filesystem::path& path, const ImageF& img);
ImageF read_pgm(std::istream& in);
ImageF read_pgm(const std::filesystem::path& path);

void write_image_csv(std::ostream& out, const ImageF& img);

/// Grayscale stand-in for a color frame: nearer surfaces are brighter, 0–255.
ImageF grayscale_from_depth(const ImageF& depth);

/// Sum of absolute differences between consecutive frames over the first `span` frames
/// (span − 1 differences), min-max normalized to [0, 255]. A motionless sequence gives the zero image.
ImageF sad_image(std::span<const ImageF> frames, int span = 10);

}  // namespace mrpd
