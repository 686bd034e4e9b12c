#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mrpd/tensor.hpp"

namespace mrpd {

struct GradCheckOptions {
  int samples = 200;       ///< minimum number of coordinates checked, spread over all tensors
  double step = 5e-3;      ///< central-difference half width
  double floor = 1e-2;     ///< denominator floor: gradients below it are compared absolutely
  double tolerance = 1e-2; ///< maximum accepted relative error
  std::uint64_t seed = 7;

  static GradCheckOptions for_float() { return {}; }
  static GradCheckOptions for_double() { return {200, 1e-5, 1e-4, 1e-5, 7}; }
  /// Single-precision gradients against double-precision differences. The tiny step makes it
  /// unlikely that a bias perturbation, which moves every activation of a channel, crosses a ReLU or pooling kink.
  static GradCheckOptions for_float_reference() { return {200, 1e-7, 1e-3, 1e-2, 7}; }
};

struct GradCheckEntry {
  std::string name;
  Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  std::size_t failures = 0;
  bool passed() const { return failures == 0 && !entries.empty(); }
};

/// |a − n| / max(|a|, |n|, floor)
inline double gradient_rel_err(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {

/// Every tensor gets an equal share of coordinates; small tensors are checked exhaustively.
template <typename Scalar>
std::vector<std::pair<std::size_t, Index>> select_coordinates(const ParameterList<Scalar>& params, int samples,
                                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t share = (static_cast<std::size_t>(std::max(samples, 1)) + params.size() - 1) / params.size();
  std::vector<std::pair<std::size_t, Index>> coords;
  for (std::size_t t = 0; t < params.size(); ++t) {
    const Index n = params[t].tensor.size();
    if (static_cast<std::size_t>(n) <= share) {
      for (Index i = 0; i < n; ++i) coords.emplace_back(t, i);
      continue;
    }
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<Index> chosen;
    while (chosen.size() < share) {
      const Index i = pick(rng);
      if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
    }
    for (Index i : chosen) coords.emplace_back(t, i);
  }
  std::uniform_int_distribution<std::size_t> any_tensor(0, params.size() - 1);
  while (coords.size() < static_cast<std::size_t>(samples)) {
    const std::size_t t = any_tensor(rng);
    std::uniform_int_distribution<Index> pick(0, params[t].tensor.size() - 1);
    coords.emplace_back(t, pick(rng));
  }
  return coords;
}

template <typename Scalar, typename LossFn>
void compute_analytic(const ParameterList<Scalar>& params, LossFn& loss_fn) {
  for (const auto& p : params) Tensor<Scalar>(p.tensor).clear_grad();
  auto loss = loss_fn();
  backward(loss);
}

/// Central difference of `loss_fn` in coordinate i of p, divided by the step actually representable in Scalar.
template <typename Scalar, typename LossFn>
double central_difference(Tensor<Scalar> p, Index i, LossFn& loss_fn, double step) {
  NoGradGuard no_grad;
  const Scalar original = p.values()[i];
  const Scalar hi = Scalar(double(original) + step);
  const Scalar lo = Scalar(double(original) - step);
  p.values()[i] = hi;
  const double up = double(loss_fn().item());
  p.values()[i] = lo;
  const double down = double(loss_fn().item());
  p.values()[i] = original;
  return (up - down) / (double(hi) - double(lo));
}

inline void record(GradCheckReport& report, GradCheckEntry e, double tolerance) {
  report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
  if (!(e.rel_err <= tolerance)) ++report.failures;
  report.entries.push_back(std::move(e));
}

}  // namespace detail

/// Compares backward() gradients of `loss_fn` against central finite differences of its forward value.
/// `loss_fn` must be deterministic (reseed any dropout inside it) and return a scalar tensor.
template <typename Scalar, typename LossFn>
GradCheckReport gradient_check(const ParameterList<Scalar>& params, LossFn&& loss_fn, const GradCheckOptions& opt) {
  if (params.empty()) throw ValidationError("gradient check: no parameters");
  detail::compute_analytic(params, loss_fn);
  GradCheckReport report;
  for (const auto& [t, i] : detail::select_coordinates(params, opt.samples, opt.seed)) {
    const Tensor<Scalar> p = params[t].tensor;
    const double analytic = p.has_grad() ? double(p.grad()[i]) : 0.0;
    const double numeric = detail::central_difference(p, i, loss_fn, opt.step);
    detail::record(report, {params[t].name, i, analytic, numeric, gradient_rel_err(analytic, numeric, opt.floor)},
                   opt.tolerance);
  }
  for (const auto& p : params) Tensor<Scalar>(p.tensor).clear_grad();
  return report;
}

/// Like gradient_check, but the finite differences are taken on a higher-precision twin of the
/// same network (`ref_params` named and shaped like `params`, values copied over first). Single
/// precision cannot resolve the loss finely enough to difference across ReLU and max-pool kinks;
/// the twin can use a step small enough to stay on one side of them.
template <typename Scalar, typename RefScalar, typename LossFn, typename RefLossFn>
GradCheckReport gradient_check_with_reference(const ParameterList<Scalar>& params, LossFn&& loss_fn,
                                              const ParameterList<RefScalar>& ref_params, RefLossFn&& ref_loss_fn,
                                              const GradCheckOptions& opt) {
  if (params.empty()) throw ValidationError("gradient check: no parameters");
  if (ref_params.size() != params.size()) throw ValidationError("gradient check: reference has a different layout");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (ref_params[t].name != params[t].name || ref_params[t].tensor.shape() != params[t].tensor.shape())
      throw ValidationError("gradient check: reference tensor '" + ref_params[t].name + "' does not match '" +
                            params[t].name + "'");
    Tensor<RefScalar> r = ref_params[t].tensor;
    r.values() = params[t].tensor.values().template cast<RefScalar>();
  }
  detail::compute_analytic(params, loss_fn);
  GradCheckReport report;
  for (const auto& [t, i] : detail::select_coordinates(params, opt.samples, opt.seed)) {
    const Tensor<Scalar> p = params[t].tensor;
    const double analytic = p.has_grad() ? double(p.grad()[i]) : 0.0;
    const double numeric = detail::central_difference(ref_params[t].tensor, i, ref_loss_fn, opt.step);
    detail::record(report, {params[t].name, i, analytic, numeric, gradient_rel_err(analytic, numeric, opt.floor)},
                   opt.tolerance);
  }
  for (const auto& p : params) Tensor<Scalar>(p.tensor).clear_grad();
  return report;
}

}  // namespace mrpd
