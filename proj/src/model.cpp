#include "mrpd/model.hpp"

namespace mrpd {

Modality parse_modality(std::string_view tag) {
  if (tag == "face") return Modality::Face;
  if (tag == "imu" || tag == "motion") return Modality::Motion;
  if (tag == "depth") return Modality::Depth;
  throw ValidationError("unknown branch '" + std::string(tag) + "' (expected face, imu or depth)");
}

ParameterCounts analytic_parameter_count(const ModelConfig& cfg, ModalitySet mods) {
  // Gate block per direction: 4 gates, each a [h × (in + h)] matrix plus h biases.
  auto bilstm = [](Index in, Index out) {
    const Index h = out / 2;
    return 2 * 4 * (h * (in + h) + h);
  };
  auto attention = [](Index d) { return 3 * (d * d + d); };

  ParameterCounts c;
  Index fused = 1;
  if (mods.face) {
    c.face = bilstm(cfg.face_in, cfg.face_out) + attention(cfg.face_out);
    fused += cfg.face_out;
  }
  if (mods.motion) {
    c.motion = bilstm(cfg.motion_in, cfg.motion_out) + attention(cfg.motion_out);
    fused += cfg.motion_out;
  }
  if (mods.depth) {
    const Index k1 = cfg.conv1_kernel, k2 = cfg.conv2_kernel;
    const Index f1 = cfg.conv1_filters, f2 = cfg.conv2_filters;
    const Index h1 = ((cfg.depth_h - k1) / cfg.conv_stride + 1) / cfg.pool1_h;
    const Index w1 = ((cfg.depth_w - k1) / cfg.conv_stride + 1) / cfg.pool1_w;
    const Index h2 = ((h1 - k2) / cfg.conv_stride + 1) / cfg.pool2_h;
    const Index w2 = ((w1 - k2) / cfg.conv_stride + 1) / cfg.pool2_w;
    const Index flat = f2 * h2 * w2;
    const Index latent = cfg.depth_cnn_latent, hs = cfg.depth_lstm_out;
    c.depth = (f1 * k1 * k1 + f1) + (f2 * f1 * k2 * k2 + f2) + (flat * latent + latent) +
              4 * (hs * (latent + 1 + hs) + hs);
    fused += cfg.depth_lstm_out;
  }
  Index width = fused;
  for (Index h : cfg.classifier_hidden) {
    c.classifier += width * h + h;
    width = h;
  }
  c.classifier += width * cfg.num_classes + cfg.num_classes;
  c.total = c.face + c.motion + c.depth + c.classifier;
  return c;
}

}  // namespace mrpd
