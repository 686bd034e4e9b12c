#include "mrpd/config.hpp"

#include <json.hpp>

namespace mrpd {

using nlohmann::json;

ModelConfig ModelConfig::paper() { return ModelConfig{}; }

ModelConfig ModelConfig::desk(Index divisor) {
  ModelConfig c = paper().scaled(divisor);
  // Quarter-resolution depth; kernels and the second pool shrink with it so the
  // flattened CNN output keeps the full-size 16×14×6 layout.
  c.depth_h = 64;
  c.depth_w = 47;
  c.conv1_kernel = 4;
  c.conv2_kernel = 2;
  c.pool2_h = 2;
  c.pool2_w = 2;
  c.validate();
  return c;
}

ModelConfig ModelConfig::scaled(Index divisor) const {
  if (divisor < 1) throw ValidationError("scale divisor must be >= 1");
  auto divide = [divisor](Index width, const char* what) {
    if (width % divisor != 0)
      throw ValidationError(std::string("scale divisor ") + std::to_string(divisor) + " does not divide " + what + " (" +
                            std::to_string(width) + ")");
    return width / divisor;
  };
  ModelConfig c = *this;
  c.scale_divisor = scale_divisor * divisor;
  c.face_out = divide(face_out, "face_out");
  c.motion_out = divide(motion_out, "motion_out");
  // The CNN latent plus the per-frame elapsed time forms the depth LSTM input; scale that sum.
  c.depth_cnn_latent = divide(depth_cnn_latent + 1, "depth LSTM input") - 1;
  c.depth_lstm_out = divide(depth_lstm_out, "depth_lstm_out");
  for (auto& h : c.classifier_hidden) h = divide(h, "classifier width");
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](Index v, const char* what) {
    if (v < 1) throw ValidationError(std::string(what) + " must be positive");
  };
  positive(face_in, "face_in");
  positive(motion_in, "motion_in");
  positive(face_out, "face_out");
  positive(motion_out, "motion_out");
  positive(depth_cnn_latent, "depth_cnn_latent");
  positive(depth_lstm_out, "depth_lstm_out");
  positive(face_frames, "face_frames");
  positive(depth_frames, "depth_frames");
  positive(motion_frames, "motion_frames");
  positive(num_classes, "num_classes");
  if (face_out % 2 || motion_out % 2) throw ValidationError("bidirectional branch widths must be even");
  if (dropout.size() < classifier_hidden.size())
    throw ValidationError("classifier needs one dropout rate per hidden layer");
  for (double r : dropout)
    if (!(r >= 0.0 && r < 1.0)) throw ValidationError("dropout rates must lie in [0, 1)");
  if (!(depth_dropout >= 0.0 && depth_dropout < 1.0)) throw ValidationError("depth dropout must lie in [0, 1)");
  if (conv1_kernel > depth_h || conv1_kernel > depth_w) throw DimensionError("first conv kernel exceeds depth image");
  if (pool1_h > conv1_out_h() || pool1_w > conv1_out_w()) throw DimensionError("first pool exceeds conv output");
  if (conv2_kernel > pool1_out_h() || conv2_kernel > pool1_out_w())
    throw DimensionError("second conv kernel exceeds pooled map");
  if (pool2_h > conv2_out_h() || pool2_w > conv2_out_w()) throw DimensionError("second pool exceeds conv output");
}

std::string ModelConfig::to_json() const {
  json j;
  j["face_in"] = face_in;
  j["face_out"] = face_out;
  j["motion_in"] = motion_in;
  j["motion_out"] = motion_out;
  j["depth_h"] = depth_h;
  j["depth_w"] = depth_w;
  j["conv1_filters"] = conv1_filters;
  j["conv1_kernel"] = conv1_kernel;
  j["pool1"] = {pool1_h, pool1_w};
  j["conv2_filters"] = conv2_filters;
  j["conv2_kernel"] = conv2_kernel;
  j["pool2"] = {pool2_h, pool2_w};
  j["conv_stride"] = conv_stride;
  j["depth_dropout"] = depth_dropout;
  j["depth_cnn_latent"] = depth_cnn_latent;
  j["depth_lstm_out"] = depth_lstm_out;
  j["fused_dim"] = fused_dim();
  j["classifier_hidden"] = classifier_hidden;
  j["dropout"] = dropout;
  j["face_frames"] = face_frames;
  j["depth_frames"] = depth_frames;
  j["motion_frames"] = motion_frames;
  j["num_classes"] = num_classes;
  j["scale_divisor"] = scale_divisor;
  j["attention"] = attention == AttentionPooling::FinalQuery ? "final_query" : "mean_pool";
  j["seed"] = seed;
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  ModelConfig c;
  if (j.contains("preset")) {
    const auto preset = j["preset"].get<std::string>();
    if (preset == "desk")
      c = desk(j.value("scale_divisor", Index{16}));
    else if (preset == "paper")
      c = paper();
    else
      throw ValidationError("model config: unknown preset '" + preset + "'");
  }
  auto read = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  read("face_in", c.face_in);
  read("face_out", c.face_out);
  read("motion_in", c.motion_in);
  read("motion_out", c.motion_out);
  read("depth_h", c.depth_h);
  read("depth_w", c.depth_w);
  read("conv1_filters", c.conv1_filters);
  read("conv1_kernel", c.conv1_kernel);
  if (j.contains("pool1")) {
    c.pool1_h = j["pool1"].at(0).get<Index>();
    c.pool1_w = j["pool1"].at(1).get<Index>();
  }
  read("conv2_filters", c.conv2_filters);
  read("conv2_kernel", c.conv2_kernel);
  if (j.contains("pool2")) {
    c.pool2_h = j["pool2"].at(0).get<Index>();
    c.pool2_w = j["pool2"].at(1).get<Index>();
  }
  read("conv_stride", c.conv_stride);
  read("depth_dropout", c.depth_dropout);
  read("depth_cnn_latent", c.depth_cnn_latent);
  read("depth_lstm_out", c.depth_lstm_out);
  read("classifier_hidden", c.classifier_hidden);
  read("dropout", c.dropout);
  read("face_frames", c.face_frames);
  read("depth_frames", c.depth_frames);
  read("motion_frames", c.motion_frames);
  read("num_classes", c.num_classes);
  if (!j.contains("preset")) read("scale_divisor", c.scale_divisor);
  read("seed", c.seed);
  if (j.contains("attention")) {
    const auto mode = j["attention"].get<std::string>();
    if (mode == "final_query")
      c.attention = AttentionPooling::FinalQuery;
    else if (mode == "mean_pool")
      c.attention = AttentionPooling::MeanPool;
    else
      throw ValidationError("model config: unknown attention mode '" + mode + "'");
  }
  if (j.contains("fused_dim") && j["fused_dim"].get<Index>() != c.fused_dim())
    throw ValidationError("model config: fused_dim " + std::to_string(j["fused_dim"].get<Index>()) +
                          " disagrees with branch widths (" + std::to_string(c.fused_dim()) + ")");
  c.validate();
  return c;
}

}  // namespace mrpd
