#pragma once

#include <array>
#include <span>
#include <vector>

#include "mrpd/data.hpp"

namespace mrpd {

/// n, mean, median, max, min and sample SD (n − 1) of one group.
struct SummaryStats {
  std::size_t n = 0;
  double mean = 0, median = 0, max = 0, min = 0, sd = 0;
};

SummaryStats describe(std::span<const double> values);

struct RegionStats {
  Region region = Region::C;
  SummaryStats stats;
};

/// Table-1-style statistics, one row per region. Every group must be nonempty.
std::vector<RegionStats> descriptive_stats(const std::array<std::vector<double>, kNumRegions>& durations);

/// Reach durations (end − start) grouped by label.
std::array<std::vector<double>, kNumRegions> durations_by_region(std::span<const MotionRecording> recordings);

struct AnovaResult {
  double f = 0.0;
  double p = 1.0;
  int df_between = 0;
  int df_within = 0;
  double ss_between = 0.0;
  double ss_within = 0.0;
};

/// One-way ANOVA. At least two groups, each with at least two observations.
/// When both sums of squares vanish F is 0; with zero within-group spread only, F is +inf and p is 0.
AnovaResult one_way_anova(std::span<const std::vector<double>> groups);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Upper tail P(F > f) of the F distribution with (d1, d2) degrees of freedom.
double f_survival(double f, double d1, double d2);

/// Upper 5% point of the studentized range for k means and df error degrees of freedom,
/// interpolated from an embedded table (k = 2..10, df ≥ 2).
double studentized_range_q05(int k, double df);

struct TukeyPair {
  int i = 0, j = 0;       // i < j
  double mean_diff = 0;   // mean_i − mean_j
  double q = 0;           // |mean_i − mean_j| / SE
  bool significant = false;
};

struct TukeyResult {
  double alpha = 0.05;
  double q_critical = 0;
  double ms_within = 0;
  int df_within = 0;
  std::vector<TukeyPair> pairs;  // (0,1), (0,2), ..., (k−2,k−1)

  /// Pair lookup in either order; mean_diff is oriented as mean_a − mean_b.
  TukeyPair pair(int a, int b) const;
};

/// Tukey–Kramer HSD. Only α = 0.05 is tabulated.
TukeyResult tukey_hsd(std::span<const std::vector<double>> groups, double alpha = 0.05);

}  // namespace mrpd
