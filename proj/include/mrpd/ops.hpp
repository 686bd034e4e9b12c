#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mrpd/tensor.hpp"

namespace mrpd {

namespace detail {

template <typename Scalar>
void require_rank2(const Tensor<Scalar>& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

template <typename Scalar>
ConstMatMap<Scalar> as_matrix(const Vec<Scalar>& v, Index rows, Index cols) {
  return ConstMatMap<Scalar>(v.data(), rows, cols);
}

template <typename Scalar>
MatMap<Scalar> as_matrix(Vec<Scalar>& v, Index rows, Index cols) {
  return MatMap<Scalar>(v.data(), rows, cols);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

/// a[m×k] · b[k×n].
template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Vec<Scalar> out(m * n);
  detail::as_matrix(out, m, n).noalias() = a.matrix() * b.matrix();
  return detail::make_result<Scalar>({m, n}, std::move(out), {a, b}, [m, k, n](const Vec<Scalar>& g, auto& in) {
    auto gm = detail::as_matrix(g, m, n);
    if (auto* ga = detail::grad_of(in[0]))
      detail::as_matrix(*ga, m, k).noalias() += gm * detail::as_matrix(in[1]->value, k, n).transpose();
    if (auto* gb = detail::grad_of(in[1]))
      detail::as_matrix(*gb, k, n).noalias() += detail::as_matrix(in[0]->value, m, k).transpose() * gm;
  });
}

/// a[m×k] · b[n×k]ᵀ, the layout of a weight matrix stored as [out×in].
template <typename Scalar>
Tensor<Scalar> matmul_nt(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_rank2(a, "matmul_nt");
  detail::require_rank2(b, "matmul_nt");
  if (a.dim(1) != b.dim(1))
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Vec<Scalar> out(m * n);
  detail::as_matrix(out, m, n).noalias() = a.matrix() * b.matrix().transpose();
  return detail::make_result<Scalar>({m, n}, std::move(out), {a, b}, [m, k, n](const Vec<Scalar>& g, auto& in) {
    auto gm = detail::as_matrix(g, m, n);
    if (auto* ga = detail::grad_of(in[0]))
      detail::as_matrix(*ga, m, k).noalias() += gm * detail::as_matrix(in[1]->value, n, k);
    if (auto* gb = detail::grad_of(in[1]))
      detail::as_matrix(*gb, n, k).noalias() += gm.transpose() * detail::as_matrix(in[0]->value, m, k);
  });
}

/// x[m×n] + b broadcast over rows; b has n elements.
template <typename Scalar>
Tensor<Scalar> add_bias(const Tensor<Scalar>& x, const Tensor<Scalar>& b) {
  detail::require_rank2(x, "add_bias");
  const Index m = x.dim(0), n = x.dim(1);
  if (b.size() != n)
    throw DimensionError("add_bias: bias " + shape_string(b.shape()) + " does not fit " + shape_string(x.shape()));
  Vec<Scalar> out(m * n);
  detail::as_matrix(out, m, n) = x.matrix().rowwise() + b.values().transpose();
  return detail::make_result<Scalar>(x.shape(), std::move(out), {x, b}, [m, n](const Vec<Scalar>& g, auto& in) {
    if (auto* gx = detail::grad_of(in[0])) *gx += g;
    if (auto* gb = detail::grad_of(in[1])) *gb += detail::as_matrix(g, m, n).colwise().sum().transpose();
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape(a, b, "add");
  return detail::make_result<Scalar>(a.shape(), a.values() + b.values(), {a, b},
                                     [](const Vec<Scalar>& g, auto& in) {
                                       if (auto* ga = detail::grad_of(in[0])) *ga += g;
                                       if (auto* gb = detail::grad_of(in[1])) *gb += g;
                                     });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape(a, b, "sub");
  return detail::make_result<Scalar>(a.shape(), a.values() - b.values(), {a, b},
                                     [](const Vec<Scalar>& g, auto& in) {
                                       if (auto* ga = detail::grad_of(in[0])) *ga += g;
                                       if (auto* gb = detail::grad_of(in[1])) *gb -= g;
                                     });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape(a, b, "mul");
  return detail::make_result<Scalar>(a.shape(), a.values().cwiseProduct(b.values()), {a, b},
                                     [](const Vec<Scalar>& g, auto& in) {
                                       if (auto* ga = detail::grad_of(in[0])) *ga += g.cwiseProduct(in[1]->value);
                                       if (auto* gb = detail::grad_of(in[1])) *gb += g.cwiseProduct(in[0]->value);
                                     });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar s) {
  return detail::make_result<Scalar>(a.shape(), a.values() * s, {a}, [s](const Vec<Scalar>& g, auto& in) {
    if (auto* ga = detail::grad_of(in[0])) *ga += g * s;
  });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  Vec<Scalar> out = a.values().cwiseMax(Scalar(0));
  return detail::make_result<Scalar>(a.shape(), std::move(out), {a}, [](const Vec<Scalar>& g, auto& in) {
    if (auto* ga = detail::grad_of(in[0]))
      *ga += (in[0]->value.array() > Scalar(0)).select(g, Scalar(0)).matrix();
  });
}

template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& a) {
  Vec<Scalar> out = a.values().array().tanh().matrix();
  Vec<Scalar> saved = out;
  return detail::make_result<Scalar>(a.shape(), std::move(out), {a},
                                     [y = std::move(saved)](const Vec<Scalar>& g, auto& in) {
                                       if (auto* ga = detail::grad_of(in[0]))
                                         *ga += (g.array() * (Scalar(1) - y.array().square())).matrix();
                                     });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a) {
  Vec<Scalar> out = (Scalar(1) / (Scalar(1) + (-a.values().array()).exp())).matrix();
  Vec<Scalar> saved = out;
  return detail::make_result<Scalar>(a.shape(), std::move(out), {a},
                                     [y = std::move(saved)](const Vec<Scalar>& g, auto& in) {
                                       if (auto* ga = detail::grad_of(in[0]))
                                         *ga += (g.array() * y.array() * (Scalar(1) - y.array())).matrix();
                                     });
}

enum class Elementwise { Add, Sub, Mul, Relu, Tanh, Sigmoid, Scale };

/// Tag-dispatched entry point over the elementwise family; `factor` is only read by Scale.
template <typename Scalar>
Tensor<Scalar> elementwise(Elementwise op, const Tensor<Scalar>& a, const Tensor<Scalar>& b = {},
                           Scalar factor = Scalar(1)) {
  auto need_b = [&] {
    if (!b) throw DimensionError("elementwise: binary op without second operand");
  };
  switch (op) {
    case Elementwise::Add: need_b(); return add(a, b);
    case Elementwise::Sub: need_b(); return sub(a, b);
    case Elementwise::Mul: need_b(); return mul(a, b);
    case Elementwise::Relu: return relu(a);
    case Elementwise::Tanh: return tanh(a);
    case Elementwise::Sigmoid: return sigmoid(a);
    case Elementwise::Scale: return scale(a, factor);
  }
  throw ValidationError("elementwise: unknown op");
}

// ---------------------------------------------------------------------------
// Shape plumbing

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw DimensionError("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  return detail::make_result<Scalar>(std::move(shape), a.values(), {a}, [](const Vec<Scalar>& g, auto& in) {
    if (auto* ga = detail::grad_of(in[0])) *ga += g;
  });
}

/// Concatenates matrices with equal row counts side by side.
template <typename Scalar>
Tensor<Scalar> concat_cols(std::span<const Tensor<Scalar>> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const Index m = parts[0].rows();
  std::vector<Index> widths;
  Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m)
      throw DimensionError("concat_cols: row count " + std::to_string(p.rows()) + " vs " + std::to_string(m));
    widths.push_back(p.cols());
    total += p.cols();
  }
  Vec<Scalar> out(m * total);
  auto om = detail::as_matrix(out, m, total);
  Index off = 0;
  for (const auto& p : parts) {
    om.middleCols(off, p.cols()) = p.matrix();
    off += p.cols();
  }
  return detail::make_result<Scalar>({m, total}, std::move(out), parts,
                                     [m, total, widths](const Vec<Scalar>& g, auto& in) {
                                       auto gm = detail::as_matrix(g, m, total);
                                       Index off = 0;
                                       for (std::size_t i = 0; i < in.size(); ++i) {
                                         if (auto* gi = detail::grad_of(in[i]))
                                           detail::as_matrix(*gi, m, widths[i]) += gm.middleCols(off, widths[i]);
                                         off += widths[i];
                                       }
                                     });
}

template <typename Scalar>
Tensor<Scalar> concat_cols(std::initializer_list<Tensor<Scalar>> parts) {
  return concat_cols(std::span<const Tensor<Scalar>>(parts.begin(), parts.size()));
}

/// Stacks matrices with equal column counts vertically.
template <typename Scalar>
Tensor<Scalar> concat_rows(std::span<const Tensor<Scalar>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const Index n = parts[0].cols();
  std::vector<Index> heights;
  Index total = 0;
  for (const auto& p : parts) {
    if (p.cols() != n)
      throw DimensionError("concat_rows: column count " + std::to_string(p.cols()) + " vs " + std::to_string(n));
    heights.push_back(p.rows());
    total += p.rows();
  }
  Vec<Scalar> out(total * n);
  Index off = 0;
  for (const auto& p : parts) {
    out.segment(off * n, p.size()) = p.values();
    off += p.rows();
  }
  return detail::make_result<Scalar>({total, n}, std::move(out), parts, [n, heights](const Vec<Scalar>& g, auto& in) {
    Index off = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (auto* gi = detail::grad_of(in[i])) *gi += g.segment(off * n, heights[i] * n);
      off += heights[i];
    }
  });
}

template <typename Scalar>
Tensor<Scalar> slice_cols(const Tensor<Scalar>& x, Index begin, Index end) {
  const Index m = x.rows(), n = x.cols();
  if (begin < 0 || end > n || begin >= end)
    throw DimensionError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) + ") out of " +
                         shape_string(x.shape()));
  const Index w = end - begin;
  Vec<Scalar> out(m * w);
  detail::as_matrix(out, m, w) = x.matrix().middleCols(begin, w);
  return detail::make_result<Scalar>({m, w}, std::move(out), {x}, [m, n, begin, w](const Vec<Scalar>& g, auto& in) {
    if (auto* gx = detail::grad_of(in[0])) detail::as_matrix(*gx, m, n).middleCols(begin, w) += detail::as_matrix(g, m, w);
  });
}

template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& x, Index begin, Index end) {
  const Index m = x.rows(), n = x.cols();
  if (begin < 0 || end > m || begin >= end)
    throw DimensionError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) + ") out of " +
                         shape_string(x.shape()));
  const Index h = end - begin;
  return detail::make_result<Scalar>({h, n}, x.values().segment(begin * n, h * n), {x},
                                     [n, begin, h](const Vec<Scalar>& g, auto& in) {
                                       if (auto* gx = detail::grad_of(in[0])) gx->segment(begin * n, h * n) += g;
                                     });
}

// ---------------------------------------------------------------------------
// Reductions (accumulated in double)

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  const double total = a.values().template cast<double>().sum();
  return detail::make_result<Scalar>({1}, Vec<Scalar>::Constant(1, Scalar(total)), {a},
                                     [](const Vec<Scalar>& g, auto& in) {
                                       if (auto* ga = detail::grad_of(in[0])) ga->array() += g[0];
                                     });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a) {
  return scale(sum(a), Scalar(1) / Scalar(a.size()));
}

/// Row-wise inner product of two [m×n] matrices, giving [m×1].
template <typename Scalar>
Tensor<Scalar> rowwise_dot(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape(a, b, "rowwise_dot");
  const Index m = a.rows(), n = a.cols();
  Vec<Scalar> out = a.matrix().cwiseProduct(b.matrix()).rowwise().sum();
  return detail::make_result<Scalar>({m, 1}, std::move(out), {a, b}, [m, n](const Vec<Scalar>& g, auto& in) {
    if (auto* ga = detail::grad_of(in[0]))
      detail::as_matrix(*ga, m, n).array() += detail::as_matrix(in[1]->value, m, n).array().colwise() * g.array();
    if (auto* gb = detail::grad_of(in[1]))
      detail::as_matrix(*gb, m, n).array() += detail::as_matrix(in[0]->value, m, n).array().colwise() * g.array();
  });
}

/// x[m×n] with row i multiplied by w[i]; w is [m×1].
template <typename Scalar>
Tensor<Scalar> scale_rows(const Tensor<Scalar>& x, const Tensor<Scalar>& w) {
  const Index m = x.rows(), n = x.cols();
  if (w.size() != m)
    throw DimensionError("scale_rows: weights " + shape_string(w.shape()) + " vs " + shape_string(x.shape()));
  Vec<Scalar> out(m * n);
  detail::as_matrix(out, m, n).array() = x.matrix().array().colwise() * w.values().array();
  return detail::make_result<Scalar>(x.shape(), std::move(out), {x, w}, [m, n](const Vec<Scalar>& g, auto& in) {
    auto gm = detail::as_matrix(g, m, n);
    if (auto* gx = detail::grad_of(in[0]))
      detail::as_matrix(*gx, m, n).array() += gm.array().colwise() * in[1]->value.array();
    if (auto* gw = detail::grad_of(in[1]))
      *gw += gm.cwiseProduct(detail::as_matrix(in[0]->value, m, n)).rowwise().sum();
  });
}

/// Row-wise softmax of a matrix, max-subtracted.
template <typename Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& x) {
  const Index m = x.rows(), n = x.cols();
  Vec<Scalar> out(m * n);
  auto om = detail::as_matrix(out, m, n);
  auto xm = x.matrix();
  for (Index i = 0; i < m; ++i) {
    const Scalar mx = xm.row(i).maxCoeff();
    om.row(i) = (xm.row(i).array() - mx).exp().matrix();
    const double z = om.row(i).template cast<double>().sum();
    om.row(i) /= Scalar(z);
  }
  Vec<Scalar> saved = out;
  return detail::make_result<Scalar>(x.shape(), std::move(out), {x},
                                     [m, n, y = std::move(saved)](const Vec<Scalar>& g, auto& in) {
                                       auto* gx = detail::grad_of(in[0]);
                                       if (!gx) return;
                                       auto ym = detail::as_matrix(y, m, n);
                                       auto gm = detail::as_matrix(g, m, n);
                                       auto gxm = detail::as_matrix(*gx, m, n);
                                       for (Index i = 0; i < m; ++i) {
                                         const Scalar dot = gm.row(i).dot(ym.row(i));
                                         gxm.row(i).array() += ym.row(i).array() * (gm.row(i).array() - dot);
                                       }
                                     });
}

/// Mean over the batch of -log softmax(logits)[label].
template <typename Scalar>
Tensor<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits, std::span<const int> labels) {
  detail::require_rank2(logits, "softmax_cross_entropy");
  const Index m = logits.dim(0), n = logits.dim(1);
  if (static_cast<Index>(labels.size()) != m)
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(m) + " rows");
  for (int y : labels)
    if (y < 0 || y >= n)
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0," + std::to_string(n) +
                            ")");
  RowMat<Scalar> probs(m, n);
  auto lm = logits.matrix();
  double loss = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double mx = lm.row(i).maxCoeff();
    double z = 0.0;
    for (Index j = 0; j < n; ++j) z += std::exp(double(lm(i, j)) - mx);
    const double log_z = std::log(z) + mx;
    for (Index j = 0; j < n; ++j) probs(i, j) = Scalar(std::exp(double(lm(i, j)) - log_z));
    loss += log_z - double(lm(i, labels[i]));
  }
  loss /= double(m);
  std::vector<int> ys(labels.begin(), labels.end());
  return detail::make_result<Scalar>(
      {1}, Vec<Scalar>::Constant(1, Scalar(loss)), {logits},
      [m, n, probs = std::move(probs), ys = std::move(ys)](const Vec<Scalar>& g, auto& in) {
        auto* gl = detail::grad_of(in[0]);
        if (!gl) return;
        auto glm = detail::as_matrix(*gl, m, n);
        const Scalar s = g[0] / Scalar(m);
        glm += probs * s;
        for (Index i = 0; i < m; ++i) glm(i, ys[static_cast<std::size_t>(i)]) -= s;
      });
}

// ---------------------------------------------------------------------------
// Spatial ops on [N, C, H, W]

inline Index valid_output_size(Index in, Index kernel, Index stride) { return (in - kernel) / stride + 1; }

/// Valid cross-correlation of x[N,C,H,W] with w[F,C,kh,kw] plus bias b[F].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b, Index stride = 1) {
  if (x.rank() != 4 || w.rank() != 4)
    throw DimensionError("conv2d: expected rank-4 input and weight, got " + shape_string(x.shape()) + " and " +
                         shape_string(w.shape()));
  const Index N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const Index F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != C)
    throw DimensionError("conv2d: weight " + shape_string(w.shape()) + " vs input " + shape_string(x.shape()));
  if (kh > H || kw > W)
    throw DimensionError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) + " larger than input " +
                         std::to_string(H) + "x" + std::to_string(W));
  if (b.size() != F) throw DimensionError("conv2d: bias " + shape_string(b.shape()) + " for " + std::to_string(F) + " filters");
  if (stride < 1) throw ValidationError("conv2d: stride must be positive");
  const Index Ho = valid_output_size(H, kh, stride), Wo = valid_output_size(W, kw, stride);
  const Index P = Ho * Wo, K = C * kh * kw;

  auto im2col = [=](const Scalar* img, RowMat<Scalar>& col) {
    col.resize(K, P);
    for (Index c = 0; c < C; ++c)
      for (Index i = 0; i < kh; ++i)
        for (Index j = 0; j < kw; ++j) {
          const Index row = (c * kh + i) * kw + j;
          Scalar* dst = col.row(row).data();
          for (Index oy = 0; oy < Ho; ++oy) {
            const Scalar* src = img + (c * H + oy * stride + i) * W + j;
            for (Index ox = 0; ox < Wo; ++ox) dst[oy * Wo + ox] = src[ox * stride];
          }
        }
  };

  Vec<Scalar> out(N * F * P);
  auto wm = detail::as_matrix(w.values(), F, K);
  RowMat<Scalar> col;
  for (Index n = 0; n < N; ++n) {
    im2col(x.values().data() + n * C * H * W, col);
    auto om = detail::as_matrix(out, N * F, P).middleRows(n * F, F);
    om.noalias() = wm * col;
    om.colwise() += b.values();
  }
  return detail::make_result<Scalar>(
      {N, F, Ho, Wo}, std::move(out), {x, w, b}, [=](const Vec<Scalar>& g, auto& in) {
        auto* gx = detail::grad_of(in[0]);
        auto* gw = detail::grad_of(in[1]);
        auto* gb = detail::grad_of(in[2]);
        auto gall = detail::as_matrix(g, N * F, P);
        auto wmat = detail::as_matrix(in[1]->value, F, K);
        RowMat<Scalar> col, dcol;
        for (Index n = 0; n < N; ++n) {
          auto gn = gall.middleRows(n * F, F);
          if (gb) *gb += gn.rowwise().sum();
          if (gw) {
            im2col(in[0]->value.data() + n * C * H * W, col);
            detail::as_matrix(*gw, F, K).noalias() += gn * col.transpose();
          }
          if (gx) {
            dcol.noalias() = wmat.transpose() * gn;
            Scalar* dimg = gx->data() + n * C * H * W;
            for (Index c = 0; c < C; ++c)
              for (Index i = 0; i < kh; ++i)
                for (Index j = 0; j < kw; ++j) {
                  const Scalar* src = dcol.row((c * kh + i) * kw + j).data();
                  for (Index oy = 0; oy < Ho; ++oy) {
                    Scalar* dst = dimg + (c * H + oy * stride + i) * W + j;
                    for (Index ox = 0; ox < Wo; ++ox) dst[ox * stride] += src[oy * Wo + ox];
                  }
                }
          }
        }
      });
}

/// Non-overlapping max pooling; trailing rows/cols that do not fill a window are dropped.
/// Gradient goes to the first maximum in each window.
template <typename Scalar>
Tensor<Scalar> maxpool2d(const Tensor<Scalar>& x, Index ph, Index pw) {
  if (x.rank() != 4) throw DimensionError("maxpool2d: expected rank-4 input, got " + shape_string(x.shape()));
  const Index N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (ph < 1 || pw < 1) throw ValidationError("maxpool2d: pool size must be positive");
  if (ph > H || pw > W)
    throw DimensionError("maxpool2d: pool " + std::to_string(ph) + "x" + std::to_string(pw) + " larger than input " +
                         std::to_string(H) + "x" + std::to_string(W));
  const Index Ho = H / ph, Wo = W / pw;
  Vec<Scalar> out(N * C * Ho * Wo);
  std::vector<Index> argmax(static_cast<std::size_t>(out.size()));
  const Scalar* src = x.values().data();
  for (Index plane = 0; plane < N * C; ++plane) {
    const Scalar* p = src + plane * H * W;
    for (Index oy = 0; oy < Ho; ++oy)
      for (Index ox = 0; ox < Wo; ++ox) {
        Index best = (oy * ph) * W + ox * pw;
        for (Index i = 0; i < ph; ++i)
          for (Index j = 0; j < pw; ++j) {
            const Index idx = (oy * ph + i) * W + ox * pw + j;
            if (p[idx] > p[best]) best = idx;
          }
        const Index o = (plane * Ho + oy) * Wo + ox;
        out[o] = p[best];
        argmax[static_cast<std::size_t>(o)] = plane * H * W + best;
      }
  }
  return detail::make_result<Scalar>({N, C, Ho, Wo}, std::move(out), {x},
                                     [argmax = std::move(argmax)](const Vec<Scalar>& g, auto& in) {
                                       auto* gx = detail::grad_of(in[0]);
                                       if (!gx) return;
                                       for (Index o = 0; o < g.size(); ++o) (*gx)[argmax[static_cast<std::size_t>(o)]] += g[o];
                                     });
}

/// Inverted dropout: in training, zero with probability `rate` and scale survivors by 1/(1-rate).
template <typename Scalar, typename Rng>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const Scalar s = Scalar(1.0 / (1.0 - rate));
  Vec<Scalar> mask(x.size());
  for (Index i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? s : Scalar(0);
  Vec<Scalar> out = x.values().cwiseProduct(mask);
  return detail::make_result<Scalar>(x.shape(), std::move(out), {x}, [mask = std::move(mask)](const Vec<Scalar>& g, auto& in) {
    if (auto* gx = detail::grad_of(in[0])) *gx += g.cwiseProduct(mask);
  });
}

}  // namespace mrpd
