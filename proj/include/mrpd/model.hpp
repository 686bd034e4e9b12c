#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrpd/config.hpp"
#include "mrpd/data.hpp"
#include "mrpd/layers.hpp"

namespace mrpd {

enum class Modality : std::uint8_t { Face, Motion, Depth };

inline std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::Face: return "face";
    case Modality::Motion: return "imu";
    case Modality::Depth: return "depth";
  }
  return "?";
}

/// Accepts "face", "imu"/"motion" and "depth".
Modality parse_modality(std::string_view tag);

struct ModalitySet {
  bool face = true;
  bool motion = true;
  bool depth = true;

  static ModalitySet all() { return {}; }
  static ModalitySet only(Modality m) {
    return {m == Modality::Face, m == Modality::Motion, m == Modality::Depth};
  }
  int count() const { return int(face) + int(motion) + int(depth); }
  bool operator==(const ModalitySet&) const = default;
};

// ---------------------------------------------------------------------------

/// Network input for B windows. Sequences are time-major; depth images are stacked time-major too.
template <typename Scalar>
struct Batch {
  Index size = 0;
  Sequence<Scalar> face;           // face_frames × [B×1405]
  Sequence<Scalar> motion;         // motion_frames × [B×11]
  Tensor<Scalar> depth_images;     // [depth_frames·B, 1, H, W]
  Sequence<Scalar> depth_elapsed;  // depth_frames × [B×1]
  Tensor<Scalar> elapsed;          // [B×1]
  std::vector<int> labels;
};

/// Builds a batch, standardizing IMU channels. Modalities that are off are left empty.
template <typename Scalar>
Batch<Scalar> make_batch(std::span<const SampleWindow* const> windows, const ModelConfig& cfg,
                         const Normalization& norm, ModalitySet mods = ModalitySet::all()) {
  if (windows.empty()) throw ValidationError("batch: no windows");
  const Index B = static_cast<Index>(windows.size());
  Batch<Scalar> batch;
  batch.size = B;
  for (const auto* w : windows) {
    if (w->face.rows() != cfg.face_frames || w->face.cols() != cfg.face_in)
      throw ValidationError("face branch: window is " + std::to_string(w->face.rows()) + "x" +
                            std::to_string(w->face.cols()) + ", model expects " + std::to_string(cfg.face_frames) +
                            "x" + std::to_string(cfg.face_in));
    if (w->motion.rows() != cfg.motion_frames || w->motion.cols() != cfg.motion_in)
      throw ValidationError("motion branch: window is " + std::to_string(w->motion.rows()) + "x" +
                            std::to_string(w->motion.cols()) + ", model expects " +
                            std::to_string(cfg.motion_frames) + "x" + std::to_string(cfg.motion_in));
    if (w->depth.rows() != cfg.depth_frames || w->depth.cols() != cfg.depth_pixels() + 1)
      throw ValidationError("depth branch: window is " + std::to_string(w->depth.rows()) + "x" +
                            std::to_string(w->depth.cols()) + ", model expects " + std::to_string(cfg.depth_frames) +
                            "x" + std::to_string(cfg.depth_pixels() + 1));
    batch.labels.push_back(region_index(w->label));
  }

  if (mods.face)
    for (Index t = 0; t < cfg.face_frames; ++t) {
      Tensor<Scalar> x({B, cfg.face_in});
      auto m = x.matrix();
      for (Index b = 0; b < B; ++b) m.row(b) = windows[static_cast<std::size_t>(b)]->face.row(t).template cast<Scalar>();
      batch.face.push_back(x);
    }

  if (mods.motion)
    for (Index t = 0; t < cfg.motion_frames; ++t) {
      Tensor<Scalar> x({B, cfg.motion_in});
      auto m = x.matrix();
      for (Index b = 0; b < B; ++b) {
        const auto& row = windows[static_cast<std::size_t>(b)]->motion;
        for (Index c = 0; c < cfg.motion_in; ++c) {
          double v = row(t, c);
          if (c < kImuChannels)
            v = (v - norm.imu_mean[static_cast<std::size_t>(c)]) / norm.imu_sd[static_cast<std::size_t>(c)];
          m(b, c) = Scalar(v);
        }
      }
      batch.motion.push_back(x);
    }

  if (mods.depth) {
    const Index pixels = cfg.depth_pixels();
    batch.depth_images = Tensor<Scalar>({cfg.depth_frames * B, 1, cfg.depth_h, cfg.depth_w});
    auto& img = batch.depth_images.values();
    for (Index t = 0; t < cfg.depth_frames; ++t) {
      Tensor<Scalar> el({B, 1});
      for (Index b = 0; b < B; ++b) {
        const auto& d = windows[static_cast<std::size_t>(b)]->depth;
        img.segment((t * B + b) * pixels, pixels) = d.row(t).head(pixels).transpose().template cast<Scalar>();
        el.values()[b] = Scalar(d(t, pixels));
      }
      batch.depth_elapsed.push_back(el);
    }
  }

  batch.elapsed = Tensor<Scalar>({B, 1});
  for (Index b = 0; b < B; ++b) batch.elapsed.values()[b] = Scalar(windows[static_cast<std::size_t>(b)]->elapsed);
  return batch;
}

template <typename Scalar>
Batch<Scalar> make_batch(std::span<const SampleWindow> windows, const ModelConfig& cfg, const Normalization& norm,
                         ModalitySet mods = ModalitySet::all()) {
  std::vector<const SampleWindow*> ptrs;
  for (const auto& w : windows) ptrs.push_back(&w);
  return make_batch<Scalar>(std::span<const SampleWindow* const>(ptrs), cfg, norm, mods);
}

// ---------------------------------------------------------------------------
// Branches

/// BiLSTM followed by attention pooling; used for the face and IMU streams.
template <typename Scalar>
struct RecurrentBranch {
  BiLstm<Scalar> bilstm;
  SelfAttention<Scalar> attention;

  RecurrentBranch() = default;
  RecurrentBranch(Index in, Index out, AttentionPooling pooling, Rng& rng)
      : bilstm(in, out, rng), attention(out, rng, pooling) {}

  Index output_size() const { return bilstm.output_size(); }

  Tensor<Scalar> forward(const Sequence<Scalar>& seq) const {
    return attention_pool(attention, bilstm_forward(bilstm, seq));
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    bilstm.collect(out, prefix + ".bilstm");
    attention.collect(out, prefix + ".attention");
  }
};

/// Per-frame CNN encoder, elapsed time appended, then a unidirectional LSTM; emits the final hidden state.
template <typename Scalar>
struct DepthBranch {
  Index frames = 0;
  Conv2d<Scalar> conv1;
  MaxPool2d pool1;
  Conv2d<Scalar> conv2;
  MaxPool2d pool2;
  Dropout drop;
  Linear<Scalar> project;
  LstmCell<Scalar> lstm;

  DepthBranch() = default;
  DepthBranch(const ModelConfig& cfg, Rng& rng)
      : frames(cfg.depth_frames),
        conv1(1, cfg.conv1_filters, cfg.conv1_kernel, cfg.conv1_kernel, cfg.conv_stride, rng),
        pool1{cfg.pool1_h, cfg.pool1_w},
        conv2(cfg.conv1_filters, cfg.conv2_filters, cfg.conv2_kernel, cfg.conv2_kernel, cfg.conv_stride, rng),
        pool2{cfg.pool2_h, cfg.pool2_w},
        drop{cfg.depth_dropout},
        project(cfg.depth_flat_dim(), cfg.depth_cnn_latent, rng),
        lstm(cfg.depth_cnn_latent + 1, cfg.depth_lstm_out, rng) {}

  Index output_size() const { return lstm.hidden_size; }

  /// CNN latent for every stacked frame, [frames·B × latent].
  Tensor<Scalar> encode(const Tensor<Scalar>& images, bool training, Rng& rng) const {
    auto x = relu(conv2d_forward(conv1, images));
    x = drop(maxpool2d_forward(pool1, x), training, rng);
    x = relu(conv2d_forward(conv2, x));
    x = drop(maxpool2d_forward(pool2, x), training, rng);
    const Index n = x.dim(0);
    x = reshape(x, {n, x.size() / n});
    return relu(project(x));
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& images, const Sequence<Scalar>& elapsed, bool training,
                         Rng& rng) const {
    if (static_cast<Index>(elapsed.size()) != frames)
      throw ValidationError("depth branch: " + std::to_string(elapsed.size()) + " elapsed columns for " +
                            std::to_string(frames) + " frames");
    const Index B = images.dim(0) / frames;
    const auto latent = encode(images, training, rng);
    Sequence<Scalar> steps;
    for (Index t = 0; t < frames; ++t)
      steps.push_back(concat_cols({slice_rows(latent, t * B, (t + 1) * B), elapsed[static_cast<std::size_t>(t)]}));
    return lstm_forward(lstm, steps).back();
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    conv1.collect(out, prefix + ".conv1");
    conv2.collect(out, prefix + ".conv2");
    project.collect(out, prefix + ".fc");
    lstm.collect(out, prefix + ".lstm");
  }
};

/// Hidden Linear+ReLU stages with dropout, then the class projection. Dropout rates beyond the
/// number of hidden layers are applied, in order, to the fused input.
template <typename Scalar>
struct Classifier {
  std::vector<Linear<Scalar>> hidden;
  Linear<Scalar> output;
  std::vector<double> rates;

  Classifier() = default;
  Classifier(Index in, const std::vector<Index>& widths, const std::vector<double>& dropout, Index classes, Rng& rng)
      : rates(dropout) {
    Index width = in;
    for (Index h : widths) {
      hidden.emplace_back(width, h, rng);
      width = h;
    }
    output = Linear<Scalar>(width, classes, rng);
  }

  Tensor<Scalar> forward(Tensor<Scalar> x, bool training, Rng& rng) const {
    const std::size_t lead = rates.size() - hidden.size();
    for (std::size_t i = 0; i < lead; ++i) x = dropout(x, rates[i], training, rng);
    for (std::size_t j = 0; j < hidden.size(); ++j) {
      x = relu(hidden[j](x));
      x = dropout(x, rates[lead + j], training, rng);
    }
    return output(x);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    for (std::size_t j = 0; j < hidden.size(); ++j) hidden[j].collect(out, prefix + ".hidden" + std::to_string(j));
    output.collect(out, prefix + ".output");
  }
};

// ---------------------------------------------------------------------------

/// Late-fusion network. With a single modality enabled it is the matching unimodal model:
/// same branch, classifier input = branch width + 1.
template <typename Scalar>
class FusionModel {
 public:
  struct Features {
    Tensor<Scalar> face, motion, depth;  // empty when the modality is off
    Tensor<Scalar> fused;                // [B × classifier_input_dim]
  };

  explicit FusionModel(const ModelConfig& cfg, ModalitySet mods = ModalitySet::all())
      : FusionModel(cfg, mods, cfg.seed) {}

  FusionModel(const ModelConfig& cfg, ModalitySet mods, std::uint64_t seed) : config_(cfg), modalities_(mods) {
    cfg.validate();
    if (mods.count() == 0) throw ValidationError("model needs at least one modality");
    Rng rng(seed);
    if (mods.face) face_ = RecurrentBranch<Scalar>(cfg.face_in, cfg.face_out, cfg.attention, rng);
    if (mods.motion) motion_ = RecurrentBranch<Scalar>(cfg.motion_in, cfg.motion_out, cfg.attention, rng);
    if (mods.depth) depth_ = DepthBranch<Scalar>(cfg, rng);
    classifier_ = Classifier<Scalar>(classifier_input_dim(), cfg.classifier_hidden, cfg.dropout, cfg.num_classes, rng);
  }

  const ModelConfig& config() const { return config_; }
  ModalitySet modalities() const { return modalities_; }

  Index classifier_input_dim() const {
    return (modalities_.face ? config_.face_out : 0) + (modalities_.motion ? config_.motion_out : 0) +
           (modalities_.depth ? config_.depth_lstm_out : 0) + 1;
  }

  Features features(const Batch<Scalar>& batch, bool training, Rng& rng) const {
    Features f;
    std::vector<Tensor<Scalar>> parts;
    if (modalities_.face) {
      if (static_cast<Index>(batch.face.size()) != config_.face_frames)
        throw ValidationError("face branch: batch has " + std::to_string(batch.face.size()) + " frames, expected " +
                              std::to_string(config_.face_frames));
      f.face = face_.forward(batch.face);
      parts.push_back(f.face);
    }
    if (modalities_.motion) {
      if (static_cast<Index>(batch.motion.size()) != config_.motion_frames)
        throw ValidationError("motion branch: batch has " + std::to_string(batch.motion.size()) +
                              " frames, expected " + std::to_string(config_.motion_frames));
      f.motion = motion_.forward(batch.motion);
      parts.push_back(f.motion);
    }
    if (modalities_.depth) {
      if (!batch.depth_images || batch.depth_images.dim(0) != config_.depth_frames * batch.size ||
          batch.depth_images.dim(2) != config_.depth_h || batch.depth_images.dim(3) != config_.depth_w)
        throw ValidationError("depth branch: batch images do not match " + std::to_string(config_.depth_frames) +
                              " frames of " + std::to_string(config_.depth_h) + "x" + std::to_string(config_.depth_w));
      f.depth = depth_.forward(batch.depth_images, batch.depth_elapsed, training, rng);
      parts.push_back(f.depth);
    }
    parts.push_back(batch.elapsed);
    f.fused = concat_cols(std::span<const Tensor<Scalar>>(parts));
    return f;
  }

  /// Logits [B×classes].
  Tensor<Scalar> forward(const Batch<Scalar>& batch, bool training, Rng& rng) const {
    return classifier_.forward(features(batch, training, rng).fused, training, rng);
  }

  /// Evaluation-mode logits without recording a tape.
  Tensor<Scalar> predict(const Batch<Scalar>& batch) const {
    NoGradGuard guard;
    Rng unused(0);
    return forward(batch, false, unused);
  }

  /// Logits for one window, shape [classes].
  Tensor<Scalar> predict(const SampleWindow& window, const Normalization& norm) const {
    const SampleWindow* ptr = &window;
    auto logits = predict(make_batch<Scalar>(std::span<const SampleWindow* const>(&ptr, 1), config_, norm, modalities_));
    return Tensor<Scalar>({config_.num_classes}, logits.values());
  }

  ParameterList<Scalar> parameters() const {
    ParameterList<Scalar> out;
    if (modalities_.face) face_.collect(out, "face");
    if (modalities_.motion) motion_.collect(out, "motion");
    if (modalities_.depth) depth_.collect(out, "depth");
    classifier_.collect(out, "classifier");
    return out;
  }

  /// Zeroes the class projection so that the initial output is uniform.
  void zero_output_layer() {
    classifier_.output.weight.values().setZero();
    classifier_.output.bias.values().setZero();
  }

  const RecurrentBranch<Scalar>& face_branch() const { return face_; }
  const RecurrentBranch<Scalar>& motion_branch() const { return motion_; }
  const DepthBranch<Scalar>& depth_branch() const { return depth_; }
  const Classifier<Scalar>& classifier() const { return classifier_; }

 private:
  ModelConfig config_;
  ModalitySet modalities_;
  RecurrentBranch<Scalar> face_, motion_;
  DepthBranch<Scalar> depth_;
  Classifier<Scalar> classifier_;
};

/// Standalone single-branch model for "face", "imu"/"motion" or "depth".
template <typename Scalar>
FusionModel<Scalar> unimodal_model(std::string_view tag, const ModelConfig& cfg) {
  return FusionModel<Scalar>(cfg, ModalitySet::only(parse_modality(tag)));
}

// ---------------------------------------------------------------------------
// Parameter accounting

struct ParameterCounts {
  Index face = 0;
  Index motion = 0;
  Index depth = 0;
  Index classifier = 0;
  Index total = 0;

  bool operator==(const ParameterCounts&) const = default;
};

/// Counts read from the instantiated tensors, grouped by name prefix.
template <typename Scalar>
ParameterCounts count_parameters(const ParameterList<Scalar>& params) {
  ParameterCounts c;
  for (const auto& p : params) {
    const Index n = p.tensor.size();
    const std::string_view name = p.name;
    if (name.starts_with("face."))
      c.face += n;
    else if (name.starts_with("motion."))
      c.motion += n;
    else if (name.starts_with("depth."))
      c.depth += n;
    else
      c.classifier += n;
    c.total += n;
  }
  return c;
}

template <typename Scalar>
ParameterCounts count_parameters(const FusionModel<Scalar>& model) {
  return count_parameters(model.parameters());
}

/// Closed-form counts from the configuration alone.
ParameterCounts analytic_parameter_count(const ModelConfig& cfg, ModalitySet mods = ModalitySet::all());

/// Branch and total parameter counts reported for the reference network.
struct ReferenceParameterCounts {
  static constexpr Index face = 44'554'241;
  static constexpr Index motion = 2'139'137;
  static constexpr Index depth = 204'509'720;
  static constexpr Index total = 282'930'211;
};

}  // namespace mrpd
