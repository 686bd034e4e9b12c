#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mrpd/image_io.hpp"
#include "mrpd/metrics.hpp"
#include "mrpd/stats.hpp"
#include "mrpd/synth.hpp"

using namespace mrpd;

namespace {

const std::vector<std::vector<double>> kBalanced = {
    {4.2, 5.1, 3.9, 4.8, 5.5}, {6.1, 5.9, 6.8, 7.2, 6.4}, {5.0, 4.7, 5.6, 5.3, 4.9}};
const std::vector<std::vector<double>> kUnbalanced = {
    {1.2, 1.5, 1.1, 1.7}, {2.0, 2.4, 1.9}, {1.4, 1.6, 1.3, 1.8, 1.5, 1.2}};

// Precision / recall / F1 straight from the one-vs-rest definitions, element by element.
struct BruteMetrics {
  double accuracy = 0, macro_p = 0, macro_r = 0, macro_f1 = 0;
};

BruteMetrics brute_force(const ConfusionMatrix& cm) {
  const auto k = cm.rows();
  long long total = 0, correct = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      total += cm(i, j);
      if (i == j) correct += cm(i, j);
    }
  BruteMetrics b;
  b.accuracy = double(correct) / double(total);
  for (Eigen::Index c = 0; c < k; ++c) {
    long long tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) {
        const bool actual = i == c, predicted = j == c;
        if (actual && predicted) tp += cm(i, j);
        if (!actual && predicted) fp += cm(i, j);
        if (actual && !predicted) fn += cm(i, j);
      }
    const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    b.macro_p += p;
    b.macro_r += r;
    b.macro_f1 += f;
  }
  b.macro_p /= double(k);
  b.macro_r /= double(k);
  b.macro_f1 /= double(k);
  return b;
}

}  // namespace

TEST_CASE("descriptive statistics") {
  const std::vector<double> ones{1, 1, 1}, seq{1, 2, 3}, even{4, 1, 3, 2};
  auto s = describe(ones);
  CHECK(s.mean == 1.0);
  CHECK(s.sd == 0.0);
  s = describe(seq);
  CHECK(s.mean == 2.0);
  CHECK(s.median == 2.0);
  CHECK(s.sd == 1.0);
  CHECK(s.min == 1.0);
  CHECK(s.max == 3.0);
  CHECK(describe(even).median == 2.5);
  CHECK_THROWS_AS(describe(std::vector<double>{}), ValidationError);

  std::array<std::vector<double>, kNumRegions> groups;
  for (auto& g : groups) g = seq;
  groups[4] = {};
  CHECK_THROWS_AS(descriptive_stats(groups), ValidationError);
}

TEST_CASE("one-way ANOVA against fixed oracles") {
  SUBCASE("hand computation") {
    const std::vector<std::vector<double>> g{{1, 2, 3}, {2, 3, 4}};
    const auto r = one_way_anova(g);
    CHECK(r.ss_between == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(r.ss_within == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(r.df_between == 1);
    CHECK(r.df_within == 4);
    CHECK(std::abs(r.f - 1.5) < 1e-9);
    CHECK(std::abs(r.p - 0.2878641347266907) < 1e-9);
  }
  SUBCASE("balanced fixture") {
    const auto r = one_way_anova(kBalanced);
    CHECK(std::abs(r.f - 15.818621523579225) < 1e-9);
    CHECK(std::abs(r.p - 0.00043245771478329475) < 1e-12);
    CHECK(r.df_between == 2);
    CHECK(r.df_within == 12);
  }
  SUBCASE("unbalanced fixture") {
    const auto r = one_way_anova(kUnbalanced);
    CHECK(std::abs(r.f - 8.78854155553185) < 1e-9);
    CHECK(std::abs(r.p - 0.006269867457037315) < 1e-12);
  }
  SUBCASE("constant groups") {
    const std::vector<std::vector<double>> same{{2, 2, 2}, {2, 2}, {2, 2, 2, 2}};
    CHECK(one_way_anova(same).f == 0.0);
    const std::vector<std::vector<double>> split{{1, 1}, {3, 3}};
    CHECK(std::isinf(one_way_anova(split).f));
    CHECK(one_way_anova(split).p == 0.0);
  }
  SUBCASE("invariance under shift and positive scale") {
    const double base = one_way_anova(kUnbalanced).f;
    for (double shift : {-100.0, 0.5, 1e3})
      for (double scale : {0.01, 1.0, 7.5, 1e3}) {
        auto g = kUnbalanced;
        for (auto& grp : g)
          for (auto& x : grp) x = scale * x + shift;
        CHECK(std::abs(one_way_anova(g).f - base) <= 1e-9 * base);
      }
  }
  SUBCASE("preconditions") {
    const std::vector<std::vector<double>> one{{1, 2, 3}};
    CHECK_THROWS_AS(one_way_anova(one), ValidationError);
    const std::vector<std::vector<double>> tiny{{1, 2}, {3}};
    CHECK_THROWS_AS(one_way_anova(tiny), ValidationError);
  }
}

TEST_CASE("F survival function") {
  CHECK(std::abs(f_survival(1.5, 1, 4) - 0.2878641347266907) < 1e-12);
  CHECK(std::abs(f_survival(3, 2, 10) - 0.095367431640625) < 1e-12);
  CHECK(std::abs(f_survival(0.5, 5, 20) - 0.7726043857905047) < 1e-12);
  CHECK(std::abs(f_survival(10, 3, 7) - 0.006331603506624043) < 1e-12);
  CHECK(f_survival(19.87, 8, 1529) == doctest::Approx(9.436061838310428e-29).epsilon(1e-8));
  CHECK(f_survival(0, 3, 7) == 1.0);
  // I_x(1, 1) = x and the symmetry I_x(a, b) = 1 − I_{1−x}(b, a).
  CHECK(incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(incomplete_beta(2.5, 4, 0.35) + incomplete_beta(4, 2.5, 0.65) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("Tukey HSD") {
  SUBCASE("balanced fixture q values") {
    const auto t = tukey_hsd(kBalanced);
    CHECK(std::abs(t.pair(0, 1).q - 7.580762261749516) < 1e-6);
    CHECK(std::abs(t.pair(0, 2).q - 1.7035420812920243) < 1e-6);
    CHECK(std::abs(t.pair(1, 2).q - 5.877220180457492) < 1e-6);
    CHECK(t.q_critical == doctest::Approx(3.7729));
    CHECK(t.pair(0, 1).significant);
    CHECK(t.pair(1, 2).significant);
    CHECK_FALSE(t.pair(0, 2).significant);
    CHECK(t.pairs.size() == 3);
    CHECK(t.pair(1, 0).mean_diff == -t.pair(0, 1).mean_diff);
    CHECK(t.pair(1, 0).q == t.pair(0, 1).q);
  }
  SUBCASE("unbalanced fixture q values") {
    const auto t = tukey_hsd(kUnbalanced);
    CHECK(std::abs(t.pair(0, 1).q - 5.476682926259024) < 1e-6);
    CHECK(std::abs(t.pair(0, 2).q - 0.8193228149962436) < 1e-6);
    CHECK(std::abs(t.pair(1, 2).q - 5.167557675993593) < 1e-6);
  }
  SUBCASE("relabeling permutes the verdicts") {
    const std::vector<std::vector<double>> permuted{kBalanced[2], kBalanced[0], kBalanced[1]};
    const auto a = tukey_hsd(kBalanced), b = tukey_hsd(permuted);
    const int where[3] = {1, 2, 0};  // original group g sits at where[g]
    for (const auto& p : a.pairs) {
      CHECK(b.pair(where[p.i], where[p.j]).significant == p.significant);
      CHECK(b.pair(where[p.i], where[p.j]).q == doctest::Approx(p.q).epsilon(1e-12));
    }
  }
  SUBCASE("extremes") {
    const std::vector<std::vector<double>> same{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
    for (const auto& p : tukey_hsd(same).pairs) CHECK_FALSE(p.significant);
    const std::vector<std::vector<double>> far{{0, 1, -1, 0.5}, {10, 11, 9, 10.5}};
    CHECK(tukey_hsd(far).pairs[0].significant);
  }
  SUBCASE("critical value table") {
    CHECK(studentized_range_q05(3, 12) == doctest::Approx(3.7729));
    CHECK(studentized_range_q05(9, 1529) == doctest::Approx(4.3865).epsilon(0.002));
    CHECK(studentized_range_q05(2, std::numeric_limits<double>::infinity()) == doctest::Approx(2.7718));
    // Interpolated values fall between their neighbors and decrease with df.
    const double q25 = studentized_range_q05(5, 25);
    CHECK(q25 < studentized_range_q05(5, 24));
    CHECK(q25 > studentized_range_q05(5, 30));
    CHECK_THROWS_AS(studentized_range_q05(11, 20), ValidationError);
    CHECK_THROWS_AS(studentized_range_q05(3, 1), ValidationError);
    CHECK_THROWS_AS(tukey_hsd(kBalanced, 0.01), ValidationError);
  }
}

TEST_CASE("reach times with Table-1-like spread differ significantly by region") {
  const auto params = GeneratorParams::defaults();
  std::array<std::vector<double>, kNumRegions> durations;
  std::vector<Participant> people;
  for (int p = 0; p < params.participants; ++p) people.push_back(make_participant(params, std::uint32_t(p), 2024));
  for (Region r : kAllRegions)
    for (int i = 0; i < kReferenceReachTimes[std::size_t(region_index(r))].n; ++i) {
      std::mt19937_64 rng(substream_seed(2024, std::uint64_t(region_index(r) * 1000 + i)));
      durations[std::size_t(region_index(r))].push_back(plan_scene(params, r, people[std::size_t(i) % people.size()], rng).reach.duration);
    }
  const std::vector<std::vector<double>> groups(durations.begin(), durations.end());
  const auto a = one_way_anova(groups);
  MESSAGE("synthetic ANOVA F(" << a.df_between << ", " << a.df_within << ") = " << a.f << ", p = " << a.p
                               << " (reference F(8, 1529) = 19.87)");
  CHECK(a.df_between == 8);
  // Table 1's group sizes add up to 1540, two more than the 1538 behind the reported F(8, 1529).
  CHECK(a.df_within == 1540 - 9);
  CHECK(a.p < 0.001);
  const auto stats = descriptive_stats(durations);
  for (const auto& row : stats) {
    CHECK(row.stats.min <= row.stats.median);
    CHECK(row.stats.median <= row.stats.max);
  }
}

TEST_CASE("classification metrics") {
  SUBCASE("hand example") {
    ConfusionMatrix cm(2, 2);
    cm << 5, 5, 0, 10;
    const auto m = classification_metrics(cm);
    CHECK(m.accuracy == 0.75);
    CHECK(m.precision[0] == 1.0);
    CHECK(m.precision[1] == doctest::Approx(2.0 / 3.0));
    CHECK(m.recall[0] == 0.5);
    CHECK(m.recall[1] == 1.0);
    CHECK(m.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0));
  }
  SUBCASE("perfect diagonal") {
    ConfusionMatrix cm = ConfusionMatrix::Zero(9, 9);
    for (int i = 0; i < 9; ++i) cm(i, i) = 7;
    const auto m = classification_metrics(cm);
    CHECK(m.accuracy == 1.0);
    CHECK(m.macro_f1 == 1.0);
    const auto c = collapse_columns(cm);
    for (double a : c.accuracy) CHECK(a == 1.0);
    CHECK(c.overall_accuracy == 1.0);
  }
  SUBCASE("zero denominators score 0 and are flagged") {
    ConfusionMatrix cm(3, 3);
    cm << 4, 0, 0, 2, 0, 0, 0, 0, 0;
    const auto m = classification_metrics(cm);
    CHECK(m.precision[1] == 0.0);
    CHECK(m.undefined_precision == std::vector<int>{1, 2});
    CHECK(m.undefined_recall == std::vector<int>{2});
  }
  SUBCASE("random matrices agree with the brute-force oracle") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
      const int k = trial < 20 ? 9 : 2 + trial % 5;
      std::uniform_int_distribution<int> count(0, trial % 3 == 0 ? 3 : 40);
      ConfusionMatrix cm(k, k);
      for (Eigen::Index i = 0; i < cm.size(); ++i) cm.data()[i] = count(rng);
      if (cm.sum() == 0) cm(0, 0) = 1;
      const auto m = classification_metrics(cm);
      const auto b = brute_force(cm);
      CHECK(m.accuracy == b.accuracy);
      CHECK(m.macro_precision == doctest::Approx(b.macro_p).epsilon(1e-15));
      CHECK(m.macro_recall == doctest::Approx(b.macro_r).epsilon(1e-15));
      CHECK(m.macro_f1 == doctest::Approx(b.macro_f1).epsilon(1e-15));
      CHECK(m.macro_f1 <= 1.0);
      if (k == 9) {
        const auto c = collapse_columns(cm);
        CHECK(c.counts.sum() == cm.sum());
        // Brute-force column collapse.
        for (int a = 0; a < 3; ++a)
          for (int p = 0; p < 3; ++p) {
            long long s = 0;
            for (int i = 0; i < 9; ++i)
              for (int j = 0; j < 9; ++j)
                if (i % 3 == a && j % 3 == p) s += cm(i, j);
            CHECK(c.counts(a, p) == s);
          }
      }
    }
  }
  SUBCASE("balanced diagonal macro F1 equals accuracy") {
    ConfusionMatrix cm = ConfusionMatrix::Zero(9, 9);
    for (int i = 0; i < 9; ++i) {
      cm(i, i) = 8;
      cm(i, (i + 1) % 9) = 2;
    }
    const auto m = classification_metrics(cm);
    CHECK(m.macro_f1 == doctest::Approx(m.accuracy).epsilon(1e-15));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(classification_metrics(ConfusionMatrix::Zero(9, 9)), ValidationError);
    CHECK_THROWS_AS(collapse_columns(ConfusionMatrix::Zero(3, 3)), DimensionError);
    const std::vector<Region> a{Region::C}, p{Region::C, Region::TL};
    CHECK_THROWS_AS(confusion_matrix(a, p), DimensionError);
  }
  SUBCASE("confusion from labels and CSV export") {
    const std::vector<Region> a{Region::TL, Region::TL, Region::BR}, p{Region::TL, Region::C, Region::BR};
    const auto cm = confusion_matrix(a, p);
    CHECK(cm(0, 0) == 1);
    CHECK(cm(0, 4) == 1);
    CHECK(cm(8, 8) == 1);
    std::ostringstream csv, mcsv;
    write_confusion_csv(csv, cm);
    CHECK(csv.str().rfind("actual\\predicted,TL,TC", 0) == 0);
    write_metrics_csv(mcsv, classification_metrics(cm), &kPaperTable3[3]);
    CHECK(mcsv.str().find("macro_f1,") != std::string::npos);
    CHECK(mcsv.str().find(",0.69") != std::string::npos);
  }
}

TEST_CASE("SAD images") {
  SUBCASE("constant sequence gives the zero image") {
    std::vector<ImageF> frames(10, ImageF::Constant(6, 5, 100.f));
    CHECK(sad_image(frames).isZero());
  }
  SUBCASE("a moving bright pixel lights exactly its path") {
    std::vector<ImageF> frames;
    for (int t = 0; t < 10; ++t) {
      ImageF f = ImageF::Zero(5, 12);
      f(2, t + 1) = 200.f;
      frames.push_back(f);
    }
    const auto sad = sad_image(frames, 10);
    for (Eigen::Index r = 0; r < 5; ++r)
      for (Eigen::Index c = 0; c < 12; ++c) {
        const bool on_path = r == 2 && c >= 1 && c <= 10;
        CHECK((sad(r, c) > 0.f) == on_path);
      }
    CHECK(sad.maxCoeff() == 255.f);
  }
  SUBCASE("span limits the frames used") {
    std::vector<ImageF> frames(12, ImageF::Zero(2, 2));
    frames[11](0, 0) = 50.f;
    CHECK(sad_image(frames, 10).isZero());
    CHECK(sad_image(frames, 12)(0, 0) == 255.f);
  }
  SUBCASE("errors") {
    std::vector<ImageF> one(1, ImageF::Zero(2, 2));
    CHECK_THROWS_AS(sad_image(one), ValidationError);
  }
  SUBCASE("generated reaching motion concentrates in the arm region") {
    const auto params = GeneratorParams::defaults();
    for (Region r : {Region::TL, Region::C, Region::BR}) {
      const auto g = generate_recording(params, r, 40 + region_index(r));
      const auto& s = g.scene;
      // Ten frames at 15 FPS from the middle of the reach, as in a motion snapshot.
      std::vector<ImageF> frames;
      ImageF arm = ImageF::Zero(params.depth_h, params.depth_w);
      std::mt19937_64 noise(1);
      for (int i = 0; i < 10; ++i) {
        const double t = s.reach.onset + 0.2 * s.reach.duration + i / params.depth_fps;
        ImageF mask;
        frames.push_back(grayscale_from_depth(render_depth(params, s, t, &noise, &mask)));
        arm = arm.cwiseMax(mask);
      }
      const auto sad = sad_image(frames, 10);
      const double in = (sad.array() * arm.array()).sum() / arm.sum();
      const double out = (sad.array() * (1.f - arm.array())).sum() / (double(arm.size()) - arm.sum());
      MESSAGE(region_name(r) << ": arm " << in << ", background " << out);
      CHECK(in > 3.0 * out);
    }
  }
}

TEST_CASE("PGM round trip") {
  ImageF img(3, 4);
  img << 0, 1, 2, 3, 100, 200, 254.6f, 255, 300, -5, 17.4f, 17.5f;
  std::stringstream buf;
  write_pgm(buf, img);
  CHECK(buf.str().rfind("P5\n4 3\n255\n", 0) == 0);
  const auto back = read_pgm(buf);
  CHECK(back(1, 2) == 255.f);
  CHECK(back(2, 0) == 255.f);
  CHECK(back(2, 1) == 0.f);
  CHECK(back(2, 2) == 17.f);
  CHECK(back(2, 3) == 18.f);
  std::stringstream bad("P2\n1 1\n255\n0");
  CHECK_THROWS_AS(read_pgm(bad), FormatError);
  std::stringstream cut("P5\n4 4\n255\nabc");
  CHECK_THROWS_AS(read_pgm(cut), FormatError);
  CHECK(confusion_heatmap(ConfusionMatrix::Identity(9, 9), 4).rows() == 36);
}
