#include "mrpd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mrpd {

namespace {

void require_groups(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw ValidationError("need at least two groups, got " + std::to_string(groups.size()));
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g].size() < 2)
      throw ValidationError("group " + std::to_string(g) + " has " + std::to_string(groups[g].size()) +
                            " observations; need at least two");
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double ss_within(std::span<const std::vector<double>> groups) {
  double ss = 0.0;
  for (const auto& g : groups) {
    const double m = mean_of(g);
    for (double x : g) ss += (x - m) * (x - m);
  }
  return ss;
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16, kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

// Upper 5% points of the studentized range, rows k = 2..10.
constexpr std::array<double, 18> kQDf = {2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 15, 20, 24, 30, 40, 60, 120,
                                         std::numeric_limits<double>::infinity()};
constexpr double kQ05[9][18] = {
    {6.0849, 4.5007, 3.9265, 3.6354, 3.4605, 3.3441, 3.2612, 3.1992, 3.1511, 3.0813, 3.0143, 2.9500, 2.9188, 2.8882,
     2.8582, 2.8288, 2.8000, 2.7718},
    {8.3308, 5.9096, 5.0402, 4.6017, 4.3392, 4.1649, 4.0410, 3.9485, 3.8768, 3.7729, 3.6734, 3.5779, 3.5317, 3.4864,
     3.4421, 3.3987, 3.3561, 3.3145},
    {9.7980, 6.8245, 5.7571, 5.2183, 4.8956, 4.6813, 4.5288, 4.4149, 4.3266, 4.1987, 4.0760, 3.9583, 3.9013, 3.8454,
     3.7907, 3.7371, 3.6846, 3.6332},
    {10.8811, 7.5017, 6.2870, 5.6731, 5.3049, 5.0601, 4.8858, 4.7554, 4.6543, 4.5077, 4.3670, 4.2319, 4.1663, 4.1021,
     4.0391, 3.9774, 3.9169, 3.8577},
    {11.7343, 8.0371, 6.7064, 6.0329, 5.6284, 5.3591, 5.1672, 5.0235, 4.9120, 4.7502, 4.5947, 4.4452, 4.3727, 4.3015,
     4.2316, 4.1632, 4.0960, 4.0301},
    {12.4349, 8.4783, 7.0526, 6.3299, 5.8953, 5.6057, 5.3991, 5.2444, 5.1242, 4.9496, 4.7816, 4.6199, 4.5413, 4.4642,
     4.3885, 4.3141, 4.2412, 4.1696},
    {13.0273, 8.8525, 7.3465, 6.5823, 6.1222, 5.8153, 5.5962, 5.4319, 5.3042, 5.1187, 4.9399, 4.7676, 4.6838, 4.6014,
     4.5205, 4.4411, 4.3630, 4.2863},
    {13.5390, 9.1766, 7.6015, 6.8014, 6.3192, 5.9973, 5.7673, 5.5947, 5.4605, 5.2653, 5.0770, 4.8954, 4.8069, 4.7199,
     4.6345, 4.5504, 4.4678, 4.3865},
    {13.9885, 9.4620, 7.8263, 6.9947, 6.4931, 6.1579, 5.9183, 5.7384, 5.5984, 5.3946, 5.1979, 5.0079, 4.9152, 4.8241,
     4.7345, 4.6463, 4.5595, 4.4741},
};

}  // namespace

SummaryStats describe(std::span<const double> values) {
  if (values.empty()) throw ValidationError("descriptive statistics of an empty group");
  SummaryStats s;
  s.n = values.size();
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / double(v.size() - 1));
  }
  return s;
}

std::vector<RegionStats> descriptive_stats(const std::array<std::vector<double>, kNumRegions>& durations) {
  std::vector<RegionStats> out;
  for (Region r : kAllRegions) {
    const auto& g = durations[std::size_t(region_index(r))];
    if (g.empty()) throw ValidationError("no recordings for region " + std::string(region_name(r)));
    out.push_back({r, describe(g)});
  }
  return out;
}

std::array<std::vector<double>, kNumRegions> durations_by_region(std::span<const MotionRecording> recordings) {
  std::array<std::vector<double>, kNumRegions> out;
  for (const auto& r : recordings) out[std::size_t(region_index(r.label))].push_back(r.duration());
  return out;
}

AnovaResult one_way_anova(std::span<const std::vector<double>> groups) {
  require_groups(groups);
  std::size_t n = 0;
  double total = 0.0;
  for (const auto& g : groups) {
    n += g.size();
    total += std::accumulate(g.begin(), g.end(), 0.0);
  }
  const double grand = total / double(n);
  AnovaResult r;
  for (const auto& g : groups) {
    const double d = mean_of(g) - grand;
    r.ss_between += double(g.size()) * d * d;
  }
  r.ss_within = ss_within(groups);
  r.df_between = int(groups.size()) - 1;
  r.df_within = int(n - groups.size());
  const double ms_b = r.ss_between / r.df_between, ms_w = r.ss_within / r.df_within;
  // Relative to the data scale, sums of squares this small are rounding residue.
  double scale = 0.0;
  for (const auto& g : groups)
    for (double x : g) scale += (x - grand) * (x - grand);
  const double tiny = 1e-24 * std::max(scale, std::numeric_limits<double>::min());
  if (r.ss_within <= tiny) {
    if (r.ss_between <= tiny) {
      r.f = 0.0;
      r.p = 1.0;
    } else {
      r.f = std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.f = ms_b / ms_w;
  r.p = f_survival(r.f, r.df_between, r.df_within);
  return r;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete beta: shape parameters must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("incomplete beta: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw ValidationError("F distribution: degrees of freedom must be positive");
  if (std::isnan(f)) throw ValidationError("F distribution: NaN statistic");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  // P(F > f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2)
  return incomplete_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

double studentized_range_q05(int k, double df) {
  if (k < 2 || k > 10) throw ValidationError("studentized range table covers 2 to 10 groups, got " + std::to_string(k));
  if (!(df >= 2.0)) throw ValidationError("studentized range table needs at least 2 error degrees of freedom");
  const auto& row = kQ05[k - 2];
  const std::size_t last_finite = kQDf.size() - 2;
  if (std::isinf(df)) return row[kQDf.size() - 1];
  if (df >= kQDf[last_finite]) {
    // Between 120 and infinity the table is linear in 1/df.
    const double t = (1.0 / kQDf[last_finite] - 1.0 / df) / (1.0 / kQDf[last_finite]);
    return row[last_finite] + t * (row[last_finite + 1] - row[last_finite]);
  }
  std::size_t hi = 1;
  while (kQDf[hi] < df) ++hi;
  const std::size_t lo = hi - 1;
  if (df == kQDf[hi]) return row[hi];
  const double t = (std::log(df) - std::log(kQDf[lo])) / (std::log(kQDf[hi]) - std::log(kQDf[lo]));
  return row[lo] + t * (row[hi] - row[lo]);
}

TukeyPair TukeyResult::pair(int a, int b) const {
  if (a == b) throw ValidationError("Tukey pair needs two different groups");
  const int i = std::min(a, b), j = std::max(a, b);
  for (const auto& p : pairs)
    if (p.i == i && p.j == j) {
      TukeyPair out = p;
      if (a > b) {
        std::swap(out.i, out.j);
        out.mean_diff = -out.mean_diff;
      }
      return out;
    }
  throw ValidationError("no such Tukey pair");
}

TukeyResult tukey_hsd(std::span<const std::vector<double>> groups, double alpha) {
  require_groups(groups);
  if (alpha != 0.05) throw ValidationError("Tukey HSD: only alpha = 0.05 is tabulated");
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  TukeyResult r;
  r.alpha = alpha;
  r.df_within = int(n - groups.size());
  r.ms_within = ss_within(groups) / r.df_within;
  r.q_critical = studentized_range_q05(int(groups.size()), r.df_within);
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      TukeyPair p;
      p.i = int(i);
      p.j = int(j);
      p.mean_diff = mean_of(groups[i]) - mean_of(groups[j]);
      const double se = std::sqrt(0.5 * r.ms_within * (1.0 / double(groups[i].size()) + 1.0 / double(groups[j].size())));
      if (se > 0.0)
        p.q = std::abs(p.mean_diff) / se;
      else
        p.q = p.mean_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      p.significant = p.q > r.q_critical;
      r.pairs.push_back(p);
    }
  return r;
}

}  // namespace mrpd
