#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrpd/errors.hpp"

namespace mrpd {

// ---------------------------------------------------------------------------
// Shelf regions

/// Nine shelf regions, row-major from the top-left as seen by the participant.
enum class Region : std::uint8_t { TL, TC, TR, CL, C, CR, BL, BC, BR };

inline constexpr int kNumRegions = 9;
inline constexpr std::array<std::string_view, kNumRegions> kRegionNames = {"TL", "TC", "TR", "CL", "C",
                                                                           "CR", "BL", "BC", "BR"};

inline int region_index(Region r) { return static_cast<int>(r); }
inline std::string_view region_name(Region r) { return kRegionNames[static_cast<std::size_t>(r)]; }
inline int shelf_row(Region r) { return region_index(r) / 3; }
inline int shelf_column(Region r) { return region_index(r) % 3; }

inline Region region_from_index(int i) {
  if (i < 0 || i >= kNumRegions) throw ValidationError("region index " + std::to_string(i) + " outside [0,9)");
  return static_cast<Region>(i);
}

inline std::optional<Region> parse_region(std::string_view name) {
  for (int i = 0; i < kNumRegions; ++i)
    if (kRegionNames[static_cast<std::size_t>(i)] == name) return static_cast<Region>(i);
  return std::nullopt;
}

inline constexpr std::array<Region, kNumRegions> kAllRegions = {Region::TL, Region::TC, Region::TR,
                                                                Region::CL, Region::C,  Region::CR,
                                                                Region::BL, Region::BC, Region::BR};

// ---------------------------------------------------------------------------
// Frames

/// Exact equality that tolerates differently sized operands.
template <typename A, typename B>
bool same_values(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a.cwiseEqual(b).all());
}

inline constexpr Eigen::Index kLandmarks = 468;
inline constexpr Eigen::Index kFaceCoords = kLandmarks * 3;     // 1404
inline constexpr Eigen::Index kFaceFeatures = kFaceCoords + 1;  // + elapsed
inline constexpr Eigen::Index kImuChannels = 10;
inline constexpr Eigen::Index kMotionFeatures = kImuChannels + 1;

using ImageF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXf = ImageF;
using ImuVector = Eigen::Matrix<float, kImuChannels, 1>;

/// 468 landmarks as interleaved (x, y, z), image-relative. Absent frames hold zeros.
struct FaceFrame {
  float timestamp = 0.f;
  float elapsed = 0.f;
  bool present = true;
  Eigen::VectorXf landmarks = Eigen::VectorXf::Zero(kFaceCoords);

  bool operator==(const FaceFrame& o) const {
    return timestamp == o.timestamp && elapsed == o.elapsed && present == o.present &&
           same_values(landmarks, o.landmarks);
  }
};

/// IMU channel layout: magnetometer xyz, angular velocity xyz, acceleration xyz, |acceleration|.
struct MotionFrame {
  float timestamp = 0.f;
  float elapsed = 0.f;
  ImuVector channels = ImuVector::Zero();

  auto magnetometer() const { return channels.segment<3>(0); }
  auto angular_velocity() const { return channels.segment<3>(3); }
  auto acceleration() const { return channels.segment<3>(6); }
  float acceleration_norm() const { return channels[9]; }

  bool operator==(const MotionFrame& o) const {
    return timestamp == o.timestamp && elapsed == o.elapsed && same_values(channels, o.channels);
  }
};

/// Depth image in meters; 0 marks an invalid pixel.
struct DepthFrame {
  float timestamp = 0.f;
  float elapsed = 0.f;
  ImageF image;

  bool operator==(const DepthFrame& o) const {
    return timestamp == o.timestamp && elapsed == o.elapsed && same_values(image, o.image);
  }
};

struct MotionRecording {
  std::uint32_t id = 0;
  std::uint32_t participant = 0;
  Region label = Region::C;
  double start = 0.0;  // annotated motion start (s, recording clock)
  double end = 0.0;    // annotated motion end
  std::vector<FaceFrame> face;
  std::vector<DepthFrame> depth;
  std::vector<MotionFrame> motion;

  double duration() const { return end - start; }
  Eigen::Index depth_h() const { return depth.empty() ? 0 : depth.front().image.rows(); }
  Eigen::Index depth_w() const { return depth.empty() ? 0 : depth.front().image.cols(); }

  /// Throws ValidationError unless streams are time-sorted, start < end and image sizes agree.
  void validate() const;

  bool operator==(const MotionRecording&) const = default;
};

// ---------------------------------------------------------------------------
// Windows

struct WindowSpec {
  Eigen::Index face_frames = 7;
  Eigen::Index depth_frames = 7;
  Eigen::Index motion_frames = 50;
  Eigen::Index depth_h = 64;
  Eigen::Index depth_w = 47;
};

/// Fixed-size model input. The last column of every matrix is elapsed time since motion start.
struct SampleWindow {
  RowMatrixXf face;    // face_frames × 1405
  RowMatrixXf depth;   // depth_frames × (H·W + 1), depth scaled to [0, 1]
  RowMatrixXf motion;  // motion_frames × 11, raw IMU units
  float elapsed = 0.f;
  Region label = Region::C;
  std::uint32_t recording_id = 0;

  bool operator==(const SampleWindow& o) const {
    return same_values(face, o.face) && same_values(depth, o.depth) && same_values(motion, o.motion) &&
           elapsed == o.elapsed && label == o.label && recording_id == o.recording_id;
  }
};

/// Maps meters to the network's depth scale: clamp to [0, 4] m then divide by 4.
inline float depth_to_unit(float meters) { return std::clamp(meters, 0.f, 4.f) / 4.f; }

/// Converts already-selected frames into a window; shared by batch extraction and live replay.
SampleWindow assemble_window(std::span<const FaceFrame> face, std::span<const DepthFrame> depth,
                             std::span<const MotionFrame> motion, const WindowSpec& spec, Region label,
                             std::uint32_t recording_id);

/// First frames at or after the start annotation, selected by ordinal index.
SampleWindow extract_window(const MotionRecording& rec, const WindowSpec& spec);

// ---------------------------------------------------------------------------
// Normalization

/// Per-channel IMU standardization constants.
struct Normalization {
  std::array<float, kImuChannels> imu_mean{};
  std::array<float, kImuChannels> imu_sd{};

  static Normalization identity();
  static Normalization fit(std::span<const MotionRecording> recordings);

  bool operator==(const Normalization&) const = default;
};

// ---------------------------------------------------------------------------
// Splits

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Number of held-out items for `n` recordings: round(n · 197/1538).
std::size_t test_count(std::size_t n);

/// Seeded shuffle into train/test with the 1341:197 proportion.
Split split_dataset(std::size_t n, std::uint64_t seed);
/// Same proportion applied within each region.
Split split_dataset_stratified(std::span<const Region> labels, std::uint64_t seed);

/// k disjoint validation folds over `items` (sizes differ by at most one).
std::vector<Fold> kfold(std::span<const std::size_t> items, int k, std::uint64_t seed);

}  // namespace mrpd
