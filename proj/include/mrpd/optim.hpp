#pragma once

#include <cmath>
#include <unordered_map>

#include "mrpd/tensor.hpp"

namespace mrpd {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are keyed by parameter storage.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  const AdamOptions& options() const { return options_; }
  long steps() const { return step_; }

  /// One update over `params`; every parameter must carry a gradient. Gradients are zeroed afterwards.
  void step(const ParameterList<Scalar>& params) {
    for (const auto& p : params)
      if (!p.tensor.has_grad()) throw ContractError("adam step: parameter '" + p.name + "' has no gradient");
    ++step_;
    const double bc1 = 1.0 - std::pow(options_.beta1, double(step_));
    const double bc2 = 1.0 - std::pow(options_.beta2, double(step_));
    for (const auto& p : params) {
      auto& state = moments_[p.tensor.node().get()];
      Tensor<Scalar> t = p.tensor;
      if (state.m.size() != t.size()) {
        state.m = Vec<double>::Zero(t.size());
        state.v = Vec<double>::Zero(t.size());
      }
      auto& value = t.values();
      const auto& g = t.grad();
      for (Index i = 0; i < t.size(); ++i) {
        const double gi = double(g[i]);
        state.m[i] = options_.beta1 * state.m[i] + (1.0 - options_.beta1) * gi;
        state.v[i] = options_.beta2 * state.v[i] + (1.0 - options_.beta2) * gi * gi;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        value[i] -= Scalar(options_.lr * mhat / (std::sqrt(vhat) + options_.eps));
      }
      t.zero_grad();
    }
  }

 private:
  struct Moments {
    Vec<double> m, v;
  };
  AdamOptions options_;
  long step_ = 0;
  std::unordered_map<const void*, Moments> moments_;
};

/// Free-function form of Adam::step; the optimizer carries the step count and moments.
template <typename Scalar>
void adam_step(const ParameterList<Scalar>& params, Adam<Scalar>& optimizer) {
  optimizer.step(params);
}

}  // namespace mrpd
