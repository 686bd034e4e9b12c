#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrpd/layers.hpp"

namespace mrpd {

/// Widths and geometry of the late-fusion network. Defaults are the full-size network.
struct ModelConfig {
  Index face_in = 1405;
  Index face_out = 2048;
  Index motion_in = 11;
  Index motion_out = 512;

  Index depth_h = 256;
  Index depth_w = 188;
  Index conv1_filters = 8;
  Index conv1_kernel = 16;
  Index pool1_h = 2;
  Index pool1_w = 3;
  Index conv2_filters = 16;
  Index conv2_kernel = 8;
  Index pool2_h = 8;
  Index pool2_w = 8;
  Index conv_stride = 1;
  double depth_dropout = 0.2;
  Index depth_cnn_latent = 2047;
  Index depth_lstm_out = 1536;

  std::vector<Index> classifier_hidden = {1024, 256};
  std::vector<double> dropout = {0.6, 0.4, 0.2};

  Index face_frames = 7;
  Index depth_frames = 7;
  Index motion_frames = 50;
  Index num_classes = 9;

  Index scale_divisor = 1;
  AttentionPooling attention = AttentionPooling::FinalQuery;
  std::uint64_t seed = 20240521;

  /// Full-size widths: face 2048, motion 512, depth 1536, fused 4097.
  static ModelConfig paper();
  /// Width-divided copy of paper() on 64×47 depth input with the conv chain scaled to match.
  static ModelConfig desk(Index divisor = 16);

  /// Divides every branch and classifier width by `divisor`; topology is unchanged.
  ModelConfig scaled(Index divisor) const;

  Index fused_dim() const { return face_out + motion_out + depth_lstm_out + 1; }
  Index depth_pixels() const { return depth_h * depth_w; }

  Index conv1_out_h() const { return valid_output_size(depth_h, conv1_kernel, conv_stride); }
  Index conv1_out_w() const { return valid_output_size(depth_w, conv1_kernel, conv_stride); }
  Index pool1_out_h() const { return conv1_out_h() / pool1_h; }
  Index pool1_out_w() const { return conv1_out_w() / pool1_w; }
  Index conv2_out_h() const { return valid_output_size(pool1_out_h(), conv2_kernel, conv_stride); }
  Index conv2_out_w() const { return valid_output_size(pool1_out_w(), conv2_kernel, conv_stride); }
  Index pool2_out_h() const { return conv2_out_h() / pool2_h; }
  Index pool2_out_w() const { return conv2_out_w() / pool2_w; }
  /// Flattened CNN width feeding the depth projection.
  Index depth_flat_dim() const { return conv2_filters * pool2_out_h() * pool2_out_w(); }

  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

/// Fully connected input width listed for the depth CNN in the reference architecture table.
/// The listed conv/pool chain does not produce it; kept for reporting only.
inline constexpr Index kReferenceDepthFcInput = 25088;

}  // namespace mrpd
