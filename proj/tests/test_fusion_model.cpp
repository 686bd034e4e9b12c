#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>
#include <random>
#include <sstream>

#include "mrpd/checkpoint.hpp"
#include "mrpd/gradcheck.hpp"
#include "mrpd/model.hpp"

using namespace mrpd;

namespace {

SampleWindow random_window(const ModelConfig& cfg, Rng& rng, Region label, double sd = 1.0) {
  std::normal_distribution<float> n(0.f, float(sd));
  std::uniform_real_distribution<float> u(0.f, 1.f);
  SampleWindow w;
  w.face = RowMatrixXf(cfg.face_frames, cfg.face_in);
  for (Index i = 0; i < w.face.size(); ++i) w.face.data()[i] = n(rng);
  w.motion = RowMatrixXf(cfg.motion_frames, cfg.motion_in);
  for (Index i = 0; i < w.motion.size(); ++i) w.motion.data()[i] = n(rng);
  w.depth = RowMatrixXf(cfg.depth_frames, cfg.depth_pixels() + 1);
  for (Index i = 0; i < w.depth.size(); ++i) w.depth.data()[i] = u(rng);
  w.elapsed = u(rng);
  w.label = label;
  return w;
}

SampleWindow zero_window(const ModelConfig& cfg) {
  SampleWindow w;
  w.face = RowMatrixXf::Zero(cfg.face_frames, cfg.face_in);
  w.motion = RowMatrixXf::Zero(cfg.motion_frames, cfg.motion_in);
  w.depth = RowMatrixXf::Zero(cfg.depth_frames, cfg.depth_pixels() + 1);
  return w;
}

std::vector<ModelConfig> count_configs() {
  auto tiny = ModelConfig::desk(32);
  tiny.classifier_hidden = {8};
  tiny.dropout = {0.5, 0.1};
  auto mean_pool = ModelConfig::desk(16);
  mean_pool.attention = AttentionPooling::MeanPool;
  return {ModelConfig::desk(16), ModelConfig::desk(8), ModelConfig::desk(32), ModelConfig::desk(4), tiny, mean_pool,
          ModelConfig::paper()};
}

}  // namespace

TEST_CASE("configuration arithmetic") {
  const auto paper = ModelConfig::paper();
  CHECK(paper.fused_dim() == 4097);
  CHECK(paper.face_out + paper.motion_out + paper.depth_lstm_out + 1 == 4097);
  CHECK(paper.depth_cnn_latent == 2047);

  const auto desk = ModelConfig::desk();
  CHECK(desk.scale_divisor == 16);
  CHECK(desk.depth_h == 64);
  CHECK(desk.depth_w == 47);
  CHECK(desk.fused_dim() == desk.face_out + desk.motion_out + desk.depth_lstm_out + 1);
  CHECK(desk.face_out == 128);
  CHECK(desk.motion_out == 32);
  CHECK(desk.depth_lstm_out == 96);

  CHECK_THROWS_AS(paper.scaled(3), ValidationError);
  CHECK(ModelConfig::from_json(desk.to_json()) == desk);
  CHECK(ModelConfig::from_json(R"({"preset": "desk"})") == desk);
}

TEST_CASE("parameter counts") {
  SUBCASE("implementation equals the closed form") {
    for (const auto& cfg : count_configs()) {
      INFO(cfg.to_json());
      FusionModel<float> model(cfg);
      CHECK(count_parameters(model) == analytic_parameter_count(cfg));
      for (auto m : {Modality::Face, Modality::Motion, Modality::Depth}) {
        if (cfg.scale_divisor == 1) continue;
        FusionModel<float> uni(cfg, ModalitySet::only(m));
        CHECK(count_parameters(uni) == analytic_parameter_count(cfg, ModalitySet::only(m)));
      }
    }
  }

  SUBCASE("bidirectional recurrent core of the face branch") {
    CHECK(BiLstm<float>::parameter_count(1405, 2048) == 19'906'560);
  }

  SUBCASE("empty parameter list") { CHECK(count_parameters(ParameterList<float>{}).total == 0); }

  SUBCASE("reference counts are carried for reporting") {
    CHECK(ReferenceParameterCounts::total == 282'930'211);
    CHECK(ReferenceParameterCounts::face + ReferenceParameterCounts::motion + ReferenceParameterCounts::depth <
          ReferenceParameterCounts::total);
  }
}

TEST_CASE("forward") {
  const auto cfg = ModelConfig::desk();
  Rng rng(4);

  SUBCASE("zero window with a zeroed output layer is uniform") {
    FusionModel<float> model(cfg);
    model.zero_output_layer();
    const auto w = zero_window(cfg);
    const SampleWindow* ptr = &w;
    auto batch = make_batch<float>(std::span<const SampleWindow* const>(&ptr, 1), cfg, Normalization::identity());
    auto logits = model.forward(batch, true, rng);
    CHECK(logits.shape() == Shape{1, 9});
    const std::vector<int> y = {4};
    CHECK(softmax_cross_entropy(logits, y).item() == doctest::Approx(std::log(9.0)).epsilon(1e-6));
  }

  SUBCASE("logits have one entry per class") {
    FusionModel<float> model(cfg);
    for (int i = 0; i < 3; ++i) {
      auto logits = model.predict(random_window(cfg, rng, Region::TL), Normalization::identity());
      CHECK(logits.shape() == Shape{9});
      CHECK(logits.values().allFinite());
    }
    for (auto tag : {"face", "imu", "depth"}) {
      auto uni = unimodal_model<float>(tag, cfg);
      CHECK(uni.classifier_input_dim() == (tag == std::string("face")    ? cfg.face_out
                                           : tag == std::string("imu") ? cfg.motion_out
                                                                       : cfg.depth_lstm_out) +
                                              1);
      CHECK(uni.predict(random_window(cfg, rng, Region::C), Normalization::identity()).shape() == Shape{9});
    }
    CHECK_THROWS_AS(unimodal_model<float>("audio", cfg), ValidationError);
  }

  SUBCASE("evaluation is a pure function of weights and window") {
    FusionModel<float> model(cfg);
    auto w = random_window(cfg, rng, Region::BR);
    auto a = model.predict(w, Normalization::identity());
    auto b = model.predict(w, Normalization::identity());
    CHECK(std::memcmp(a.values().data(), b.values().data(), sizeof(float) * 9) == 0);
  }

  SUBCASE("batched and single predictions agree") {
    FusionModel<float> model(cfg);
    std::vector<SampleWindow> ws = {random_window(cfg, rng, Region::TL), random_window(cfg, rng, Region::CR)};
    auto batched = model.predict(make_batch<float>(std::span<const SampleWindow>(ws), cfg, Normalization::identity()));
    for (Index b = 0; b < 2; ++b) {
      auto single = model.predict(ws[static_cast<std::size_t>(b)], Normalization::identity());
      for (Index k = 0; k < 9; ++k) CHECK(std::abs(batched.matrix()(b, k) - single[k]) <= 1e-5);
    }
  }

  SUBCASE("mismatched windows name the branch") {
    FusionModel<float> model(cfg);
    auto w = random_window(cfg, rng, Region::TL);
    w.motion = RowMatrixXf::Zero(49, cfg.motion_in);
    try {
      model.predict(w, Normalization::identity());
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("motion") != std::string::npos);
    }
    auto d = random_window(cfg, rng, Region::TL);
    d.depth = RowMatrixXf::Zero(cfg.depth_frames, 10);
    CHECK_THROWS_WITH_AS(model.predict(d, Normalization::identity()), doctest::Contains("depth"), ValidationError);
  }

  SUBCASE("IMU channels are standardized, elapsed time is not") {
    auto w = random_window(cfg, rng, Region::TL);
    Normalization norm = Normalization::identity();
    norm.imu_mean[2] = 3.f;
    norm.imu_sd[2] = 2.f;
    const SampleWindow* ptr = &w;
    auto batch = make_batch<float>(std::span<const SampleWindow* const>(&ptr, 1), cfg, norm);
    CHECK(batch.motion[5][2] == doctest::Approx((w.motion(5, 2) - 3.f) / 2.f));
    CHECK(batch.motion[5][10] == w.motion(5, 10));
    CHECK(batch.motion[5][1] == w.motion(5, 1));
  }
}

TEST_CASE("late fusion touches only its slice") {
  const auto cfg = ModelConfig::desk(32);
  FusionModel<float> model(cfg);
  Rng rng(9);
  auto w = random_window(cfg, rng, Region::TC);
  const SampleWindow* ptr = &w;
  auto batch = make_batch<float>(std::span<const SampleWindow* const>(&ptr, 1), cfg, Normalization::identity());
  auto f = model.features(batch, false, rng);
  auto fused = concat_cols({Tensor<float>::zeros({1, cfg.face_out}), f.motion, f.depth, batch.elapsed});
  backward(sum(model.classifier().forward(fused, false, rng)));
  const auto& first = model.classifier().hidden.front().weight;
  auto g = RowMat<float>::Map(first.grad().data(), first.dim(0), first.dim(1));
  CHECK(g.leftCols(cfg.face_out).cwiseAbs().maxCoeff() == 0.f);
  CHECK(g.rightCols(first.dim(1) - cfg.face_out).cwiseAbs().maxCoeff() > 0.f);
  for (const auto& p : model.parameters()) Tensor<float>(p.tensor).clear_grad();
}

TEST_CASE("full model gradients match finite differences") {
  const auto cfg = ModelConfig::desk();
  Rng rng(11);
  std::vector<SampleWindow> ws = {random_window(cfg, rng, Region::TL, 0.5), random_window(cfg, rng, Region::BC, 0.5)};

  auto loss_for = [&]<typename Scalar>(const FusionModel<Scalar>& model, const Batch<Scalar>& batch) {
    return [&] {
      Rng drop(123);
      return softmax_cross_entropy(model.forward(batch, true, drop), batch.labels);
    };
  };
  auto audit = [](const GradCheckReport& report, const ParameterList<float>& params, double tolerance) {
    std::set<std::string> covered;
    for (const auto& e : report.entries) covered.insert(e.name);
    CHECK(covered.size() == params.size());
    CHECK(report.entries.size() >= 200);
    for (const auto& e : report.entries)
      if (e.rel_err > tolerance) MESSAGE(e.name, "[", e.index, "] ", e.analytic, " vs ", e.numeric);
    CHECK(report.passed());
  };

  FusionModel<float> model(cfg);
  FusionModel<double> twin(cfg);
  const auto batch = make_batch<float>(std::span<const SampleWindow>(ws), cfg, Normalization::identity());
  const auto batch64 = make_batch<double>(std::span<const SampleWindow>(ws), cfg, Normalization::identity());

  SUBCASE("single precision") {
    auto opt = GradCheckOptions::for_float_reference();
    opt.samples = 240;
    auto report = gradient_check_with_reference(model.parameters(), loss_for(model, batch), twin.parameters(),
                                                loss_for(twin, batch64), opt);
    audit(report, model.parameters(), opt.tolerance);
    CHECK(report.max_rel_err <= 1e-2);
  }

  SUBCASE("double precision") {
    auto opt = GradCheckOptions::for_double();
    opt.samples = 240;
    auto report = gradient_check(twin.parameters(), loss_for(twin, batch64), opt);
    audit(report, model.parameters(), opt.tolerance);
    CHECK(report.max_rel_err <= 1e-5);
  }
}

TEST_CASE("checkpoint restores predictions") {
  const auto cfg = ModelConfig::desk(32);
  Rng rng(15);
  FusionModel<float> a(cfg, ModalitySet::all(), 1), b(cfg, ModalitySet::all(), 2);
  auto w = random_window(cfg, rng, Region::CL);
  std::stringstream buf;
  checkpoint::write(buf, checkpoint::to_entries(a.parameters()));
  checkpoint::assign(b.parameters(), checkpoint::read(buf));
  auto pa = a.predict(w, Normalization::identity()), pb = b.predict(w, Normalization::identity());
  CHECK(std::memcmp(pa.values().data(), pb.values().data(), sizeof(float) * 9) == 0);

  FusionModel<float> other(ModelConfig::desk(16));
  CHECK_THROWS_AS(checkpoint::assign(other.parameters(), checkpoint::to_entries(a.parameters())), DimensionError);
}
