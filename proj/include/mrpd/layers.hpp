#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mrpd/ops.hpp"

namespace mrpd {

using Rng = std::mt19937_64;

/// A time-major sequence: one [batch×features] matrix per timestep.
template <typename Scalar>
using Sequence = std::vector<Tensor<Scalar>>;

namespace detail {

template <typename Scalar>
Tensor<Scalar> uniform_param(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<Scalar> t(std::move(shape), true);
  for (Index i = 0; i < t.size(); ++i) t.values()[i] = Scalar(dist(rng));
  return t;
}

template <typename Scalar>
void append(ParameterList<Scalar>& out, const std::string& name, const Tensor<Scalar>& t) {
  out.push_back({name, t});
}

}  // namespace detail

// ---------------------------------------------------------------------------

template <typename Scalar>
struct Linear {
  Index in_features = 0, out_features = 0;
  Tensor<Scalar> weight;  // [out×in]
  Tensor<Scalar> bias;    // [out]

  Linear() = default;
  Linear(Index in, Index out, Rng& rng)
      : in_features(in),
        out_features(out),
        weight(detail::uniform_param<Scalar>({out, in}, 1.0 / std::sqrt(double(in)), rng)),
        bias(detail::uniform_param<Scalar>({out}, 1.0 / std::sqrt(double(in)), rng)) {}

  static Index parameter_count(Index in, Index out) { return in * out + out; }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const {
    if (x.cols() != in_features)
      throw DimensionError("linear: input width " + std::to_string(x.cols()) + ", expected " +
                           std::to_string(in_features));
    return add_bias(matmul_nt(x, weight), bias);
  }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    detail::append(out, prefix + ".weight", weight);
    detail::append(out, prefix + ".bias", bias);
  }
};

// ---------------------------------------------------------------------------

/// LSTM cell with fused gate weights [4h×(in+h)] in gate order input, forget, cell, output.
template <typename Scalar>
struct LstmCell {
  Index input_size = 0, hidden_size = 0;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;

  LstmCell() = default;
  LstmCell(Index in, Index hidden, Rng& rng)
      : input_size(in),
        hidden_size(hidden),
        weight(detail::uniform_param<Scalar>({4 * hidden, in + hidden}, 1.0 / std::sqrt(double(hidden)), rng)),
        bias(detail::uniform_param<Scalar>({4 * hidden}, 1.0 / std::sqrt(double(hidden)), rng)) {}

  static Index parameter_count(Index in, Index hidden) { return 4 * (hidden * (in + hidden) + hidden); }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    detail::append(out, prefix + ".weight", weight);
    detail::append(out, prefix + ".bias", bias);
  }
};

/// Runs the recurrence over `seq`; returns the hidden state after every step.
/// Missing initial states start at zero.
template <typename Scalar>
Sequence<Scalar> lstm_forward(const LstmCell<Scalar>& cell, const Sequence<Scalar>& seq, Tensor<Scalar> h0 = {},
                              Tensor<Scalar> c0 = {}) {
  if (seq.empty()) throw ValidationError("lstm: sequence must hold at least one timestep");
  const Index batch = seq[0].rows(), in = cell.input_size, hs = cell.hidden_size;
  for (const auto& x : seq)
    if (x.rows() != batch || x.cols() != in)
      throw DimensionError("lstm: timestep shape " + shape_string(x.shape()) + ", expected [" + std::to_string(batch) +
                           "x" + std::to_string(in) + "]");
  if (!h0) h0 = Tensor<Scalar>::zeros({batch, hs});
  if (!c0) c0 = Tensor<Scalar>::zeros({batch, hs});
  if (h0.rows() != batch || h0.cols() != hs || c0.rows() != batch || c0.cols() != hs)
    throw DimensionError("lstm: initial state shape mismatch");

  const auto w_in = slice_cols(cell.weight, 0, in);
  const auto w_rec = slice_cols(cell.weight, in, in + hs);
  // Input projections for all timesteps in one product.
  const auto projected = add_bias(matmul_nt(concat_rows(std::span<const Tensor<Scalar>>(seq)), w_in), cell.bias);

  Tensor<Scalar> h = h0, c = c0;
  Sequence<Scalar> out;
  out.reserve(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const Index row = static_cast<Index>(t) * batch;
    const auto gates = add(slice_rows(projected, row, row + batch), matmul_nt(h, w_rec));
    const auto i = sigmoid(slice_cols(gates, 0, hs));
    const auto f = sigmoid(slice_cols(gates, hs, 2 * hs));
    const auto g = tanh(slice_cols(gates, 2 * hs, 3 * hs));
    const auto o = sigmoid(slice_cols(gates, 3 * hs, 4 * hs));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh(c));
    out.push_back(h);
  }
  return out;
}

/// Single-sample convenience: seq is [T×in], result is [T×h].
template <typename Scalar>
Tensor<Scalar> lstm_forward(const LstmCell<Scalar>& cell, const Tensor<Scalar>& seq, Tensor<Scalar> h0 = {},
                            Tensor<Scalar> c0 = {}) {
  if (seq.rank() != 2 || seq.rows() < 1) throw ValidationError("lstm: sequence must be a non-empty [T×in] matrix");
  Sequence<Scalar> steps;
  for (Index t = 0; t < seq.rows(); ++t) steps.push_back(slice_rows(seq, t, t + 1));
  if (h0) h0 = reshape(h0, {1, h0.size()});
  if (c0) c0 = reshape(c0, {1, c0.size()});
  auto out = lstm_forward(cell, steps, h0, c0);
  return concat_rows(std::span<const Tensor<Scalar>>(out));
}

// ---------------------------------------------------------------------------

template <typename Scalar>
struct BiLstm {
  LstmCell<Scalar> forward_cell, backward_cell;

  BiLstm() = default;
  BiLstm(Index in, Index out, Rng& rng) {
    if (out % 2 != 0) throw ValidationError("bilstm: output size must be even, got " + std::to_string(out));
    forward_cell = LstmCell<Scalar>(in, out / 2, rng);
    backward_cell = LstmCell<Scalar>(in, out / 2, rng);
  }

  Index output_size() const { return 2 * forward_cell.hidden_size; }
  static Index parameter_count(Index in, Index out) { return 2 * LstmCell<Scalar>::parameter_count(in, out / 2); }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    forward_cell.collect(out, prefix + ".fwd");
    backward_cell.collect(out, prefix + ".bwd");
  }
};

/// Per-timestep concat of a forward pass and a re-reversed pass over the reversed sequence.
template <typename Scalar>
Sequence<Scalar> bilstm_forward(const BiLstm<Scalar>& layer, const Sequence<Scalar>& seq) {
  if (seq.empty()) throw ValidationError("bilstm: sequence must hold at least one timestep");
  const auto fwd = lstm_forward(layer.forward_cell, seq);
  const Sequence<Scalar> reversed(seq.rbegin(), seq.rend());
  const auto bwd = lstm_forward(layer.backward_cell, reversed);
  const std::size_t T = seq.size();
  Sequence<Scalar> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) out.push_back(concat_cols({fwd[t], bwd[T - 1 - t]}));
  return out;
}

template <typename Scalar>
Tensor<Scalar> bilstm_forward(const BiLstm<Scalar>& layer, const Tensor<Scalar>& seq) {
  if (seq.rank() != 2 || seq.rows() < 1) throw ValidationError("bilstm: sequence must be a non-empty [T×in] matrix");
  Sequence<Scalar> steps;
  for (Index t = 0; t < seq.rows(); ++t) steps.push_back(slice_rows(seq, t, t + 1));
  auto out = bilstm_forward(layer, steps);
  return concat_rows(std::span<const Tensor<Scalar>>(out));
}

// ---------------------------------------------------------------------------

enum class AttentionPooling {
  FinalQuery,  ///< query from the last timestep against all timesteps
  MeanPool,    ///< full self-attention, then mean over timesteps
};

/// Single-head scaled dot-product self-attention used to pool a sequence into one vector.
template <typename Scalar>
struct SelfAttention {
  Index model_dim = 0;
  AttentionPooling pooling = AttentionPooling::FinalQuery;
  Linear<Scalar> query, key, value;

  SelfAttention() = default;
  SelfAttention(Index d, Rng& rng, AttentionPooling mode = AttentionPooling::FinalQuery)
      : model_dim(d), pooling(mode), query(d, d, rng), key(d, d, rng), value(d, d, rng) {}

  Scalar scale() const { return Scalar(1.0 / std::sqrt(double(model_dim))); }
  static Index parameter_count(Index d) { return 3 * Linear<Scalar>::parameter_count(d, d); }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    query.collect(out, prefix + ".q");
    key.collect(out, prefix + ".k");
    value.collect(out, prefix + ".v");
  }
};

template <typename Scalar>
struct AttentionOutput {
  Tensor<Scalar> pooled;   // [B×d]
  Tensor<Scalar> weights;  // [B×T] for FinalQuery; [B×T] averaged rows for MeanPool
};

template <typename Scalar>
AttentionOutput<Scalar> attention_pool_detailed(const SelfAttention<Scalar>& att, const Sequence<Scalar>& seq) {
  if (seq.empty()) throw ValidationError("attention: sequence must hold at least one timestep");
  const Index batch = seq[0].rows(), d = att.model_dim;
  for (const auto& x : seq)
    if (x.cols() != d || x.rows() != batch)
      throw DimensionError("attention: timestep shape " + shape_string(x.shape()) + ", model dim " + std::to_string(d));
  const std::size_t T = seq.size();
  const auto stacked = concat_rows(std::span<const Tensor<Scalar>>(seq));
  const auto keys = att.key(stacked);
  const auto values = att.value(stacked);

  auto attend = [&](const Tensor<Scalar>& q) {
    Sequence<Scalar> scores;
    for (std::size_t t = 0; t < T; ++t) {
      const Index row = static_cast<Index>(t) * batch;
      scores.push_back(scale(rowwise_dot(q, slice_rows(keys, row, row + batch)), att.scale()));
    }
    auto weights = softmax_rows(concat_cols(std::span<const Tensor<Scalar>>(scores)));
    Tensor<Scalar> pooled;
    for (std::size_t t = 0; t < T; ++t) {
      const Index row = static_cast<Index>(t) * batch;
      const Index col = static_cast<Index>(t);
      auto term = scale_rows(slice_rows(values, row, row + batch), slice_cols(weights, col, col + 1));
      pooled = pooled ? add(pooled, term) : term;
    }
    return AttentionOutput<Scalar>{pooled, weights};
  };

  if (att.pooling == AttentionPooling::FinalQuery) return attend(att.query(seq.back()));

  const auto queries = att.query(stacked);
  Tensor<Scalar> sum_pooled, sum_weights;
  for (std::size_t s = 0; s < T; ++s) {
    const Index row = static_cast<Index>(s) * batch;
    auto r = attend(slice_rows(queries, row, row + batch));
    sum_pooled = sum_pooled ? add(sum_pooled, r.pooled) : r.pooled;
    sum_weights = sum_weights ? add(sum_weights, r.weights) : r.weights;
  }
  const Scalar inv = Scalar(1) / Scalar(T);
  return {scale(sum_pooled, inv), scale(sum_weights, inv)};
}

template <typename Scalar>
Tensor<Scalar> attention_pool(const SelfAttention<Scalar>& att, const Sequence<Scalar>& seq) {
  return attention_pool_detailed(att, seq).pooled;
}

/// Single-sample convenience: seq is [T×d], result is [1×d].
template <typename Scalar>
Tensor<Scalar> attention_pool(const SelfAttention<Scalar>& att, const Tensor<Scalar>& seq) {
  if (seq.rank() != 2 || seq.rows() < 1) throw ValidationError("attention: sequence must be a non-empty [T×d] matrix");
  Sequence<Scalar> steps;
  for (Index t = 0; t < seq.rows(); ++t) steps.push_back(slice_rows(seq, t, t + 1));
  return attention_pool(att, steps);
}

// ---------------------------------------------------------------------------

template <typename Scalar>
struct Conv2d {
  Index in_channels = 0, filters = 0, kernel_h = 0, kernel_w = 0, stride = 1;
  Tensor<Scalar> weight;  // [F, C, kh, kw]
  Tensor<Scalar> bias;    // [F]

  Conv2d() = default;
  Conv2d(Index channels, Index n_filters, Index kh, Index kw, Index s, Rng& rng)
      : in_channels(channels), filters(n_filters), kernel_h(kh), kernel_w(kw), stride(s) {
    const double bound = 1.0 / std::sqrt(double(channels * kh * kw));
    weight = detail::uniform_param<Scalar>({n_filters, channels, kh, kw}, bound, rng);
    bias = detail::uniform_param<Scalar>({n_filters}, bound, rng);
  }

  static Index parameter_count(Index channels, Index n_filters, Index kh, Index kw) {
    return n_filters * channels * kh * kw + n_filters;
  }

  Index output_height(Index h) const { return valid_output_size(h, kernel_h, stride); }
  Index output_width(Index w) const { return valid_output_size(w, kernel_w, stride); }

  void collect(ParameterList<Scalar>& out, const std::string& prefix) const {
    detail::append(out, prefix + ".weight", weight);
    detail::append(out, prefix + ".bias", bias);
  }
};

/// Accepts [C,H,W] for one image or [N,C,H,W] for a batch.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Conv2d<Scalar>& layer, const Tensor<Scalar>& img) {
  if (img.rank() == 3) {
    auto out = conv2d(reshape(img, {1, img.dim(0), img.dim(1), img.dim(2)}), layer.weight, layer.bias, layer.stride);
    return reshape(out, {out.dim(1), out.dim(2), out.dim(3)});
  }
  return conv2d(img, layer.weight, layer.bias, layer.stride);
}

struct MaxPool2d {
  Index pool_h = 1, pool_w = 1;
  Index output_height(Index h) const { return h / pool_h; }
  Index output_width(Index w) const { return w / pool_w; }
};

template <typename Scalar>
Tensor<Scalar> maxpool2d_forward(const MaxPool2d& layer, const Tensor<Scalar>& img) {
  if (img.rank() == 3) {
    auto out = maxpool2d(reshape(img, {1, img.dim(0), img.dim(1), img.dim(2)}), layer.pool_h, layer.pool_w);
    return reshape(out, {out.dim(1), out.dim(2), out.dim(3)});
  }
  return maxpool2d(img, layer.pool_h, layer.pool_w);
}

struct Dropout {
  double rate = 0.0;

  template <typename Scalar>
  Tensor<Scalar> operator()(const Tensor<Scalar>& x, bool training, Rng& rng) const {
    return dropout(x, rate, training, rng);
  }
};

}  // namespace mrpd
