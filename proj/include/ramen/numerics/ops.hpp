#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ramen/numerics/tensor.hpp"

namespace ramen {

namespace detail {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S> using MapMat = Eigen::Map<RowMat<S>>;
template <typename S> using MapConstMat = Eigen::Map<const RowMat<S>>;
template <typename S>
using StridedMat = Eigen::Map<RowMat<S>, 0, Eigen::OuterStride<>>;
template <typename S>
using StridedConstMat = Eigen::Map<const RowMat<S>, 0, Eigen::OuterStride<>>;

inline void require_same_shape(const Shape &a, const Shape &b, const char *op) {
  if (a != b)
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a) +
                         " vs " + to_string(b));
}

template <typename S> S *grad_of(Node<S> &node, std::size_t parent) {
  Node<S> &p = *node.parents[parent];
  return p.requires_grad ? p.grad_buffer() : nullptr;
}

inline Shape strides_of(const Shape &shape) {
  Shape strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename S> Tensor<S> add(const Tensor<S> &a, const Tensor<S> &b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor<S>::make_result(a.shape(), std::move(out), {a, b}, [](Node<S> &n) {
    for (std::size_t p = 0; p < 2; ++p)
      if (S *g = detail::grad_of(n, p))
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

template <typename S> Tensor<S> sub(const Tensor<S> &a, const Tensor<S> &b) {
  detail::require_same_shape(a.shape(), b.shape(), "sub");
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor<S>::make_result(a.shape(), std::move(out), {a, b}, [](Node<S> &n) {
    if (S *g = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    if (S *g = detail::grad_of(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
  });
}

template <typename S> Tensor<S> mul(const Tensor<S> &a, const Tensor<S> &b) {
  detail::require_same_shape(a.shape(), b.shape(), "mul");
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor<S>::make_result(a.shape(), std::move(out), {a, b}, [](Node<S> &n) {
    const auto &av = n.parents[0]->data;
    const auto &bv = n.parents[1]->data;
    if (S *g = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * bv[i];
    if (S *g = detail::grad_of(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * av[i];
  });
}

template <typename S> Tensor<S> scale(const Tensor<S> &a, S factor) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return Tensor<S>::make_result(a.shape(), std::move(out), {a}, [factor](Node<S> &n) {
    if (S *g = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * factor;
  });
}

/// x + v where v's shape equals the trailing axes of x (leading-axis expansion).
template <typename S>
Tensor<S> add_broadcast(const Tensor<S> &x, const Tensor<S> &v) {
  const auto &xs = x.shape();
  const auto &vs = v.shape();
  if (vs.size() > xs.size() ||
      !std::equal(vs.begin(), vs.end(), xs.end() - static_cast<long>(vs.size())))
    throw DimensionError("add_broadcast: " + to_string(vs) +
                         " is not a trailing shape of " + to_string(xs));
  const std::size_t inner = v.size();
  const std::size_t outer = inner ? x.size() / inner : 0;
  std::vector<S> out(x.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = x[o * inner + i] + v[i];
  return Tensor<S>::make_result(xs, std::move(out), {x, v}, [outer, inner](Node<S> &n) {
    if (S *g = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    if (S *g = detail::grad_of(n, 1))
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) g[i] += n.grad[o * inner + i];
  });
}

/// Exact GELU, x * Phi(x).
template <typename S> Tensor<S> gelu(const Tensor<S> &x) {
  static constexpr double kInvSqrt2 = 0.70710678118654752440;
  std::vector<S> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const S v = x[i];
    out[i] = S(0.5) * v * (S(1) + std::erf(v * S(kInvSqrt2)));
  }
  return Tensor<S>::make_result(x.shape(), std::move(out), {x}, [](Node<S> &n) {
    static constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    S *g = detail::grad_of(n, 0);
    if (!g) return;
    const auto &xv = n.parents[0]->data;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const S v = xv[i];
      const S cdf = S(0.5) * (S(1) + std::erf(v * S(kInvSqrt2)));
      const S pdf = S(kInvSqrt2Pi) * std::exp(S(-0.5) * v * v);
      g[i] += n.grad[i] * (cdf + v * pdf);
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename S> Tensor<S> sum(const Tensor<S> &x) {
  S total = 0;
  for (S v : x.data()) total += v;
  return Tensor<S>::make_result(Shape{1}, {total}, {x}, [](Node<S> &n) {
    if (S *g = detail::grad_of(n, 0)) {
      const S seed = n.grad[0];
      for (std::size_t i = 0; i < n.parents[0]->data.size(); ++i) g[i] += seed;
    }
  });
}

template <typename S> Tensor<S> mean(const Tensor<S> &x) {
  return scale(sum(x), S(1) / static_cast<S>(x.size()));
}

/// The single element x[index] as a scalar tensor.
template <typename S> Tensor<S> element(const Tensor<S> &x, std::size_t index) {
  if (index >= x.size()) throw ArgumentError("element: index out of range");
  return Tensor<S>::make_result(Shape{1}, {x[index]}, {x}, [index](Node<S> &n) {
    if (S *g = detail::grad_of(n, 0)) g[index] += n.grad[0];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename S> Tensor<S> matmul(const Tensor<S> &a, const Tensor<S> &b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: incompatible shapes " + to_string(a.shape()) +
                         " and " + to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<S> out(m * n);
  {
    detail::MapConstMat<S> A(a.data().data(), m, k);
    detail::MapConstMat<S> B(b.data().data(), k, n);
    detail::MapMat<S> C(out.data(), m, n);
    C.noalias() = A * B;
  }
  return Tensor<S>::make_result(Shape{m, n}, std::move(out), {a, b},
                                [m, k, n](Node<S> &node) {
    detail::MapConstMat<S> G(node.grad.data(), m, n);
    if (S *ga = detail::grad_of(node, 0)) {
      detail::MapConstMat<S> B(node.parents[1]->data.data(), k, n);
      detail::MapMat<S>(ga, m, k).noalias() += G * B.transpose();
    }
    if (S *gb = detail::grad_of(node, 1)) {
      detail::MapConstMat<S> A(node.parents[0]->data.data(), m, k);
      detail::MapMat<S>(gb, k, n).noalias() += A.transpose() * G;
    }
  });
}

/// x[n x in] * w[in x out] + b[out].
template <typename S>
Tensor<S> linear(const Tensor<S> &x, const Tensor<S> &w, const Tensor<S> &b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) || b.size() != w.dim(1))
    throw DimensionError("linear: incompatible shapes " + to_string(x.shape()) + ", " +
                         to_string(w.shape()) + ", " + to_string(b.shape()));
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  std::vector<S> out(m * n);
  {
    detail::MapConstMat<S> X(x.data().data(), m, k);
    detail::MapConstMat<S> W(w.data().data(), k, n);
    Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>> B(b.data().data(), n);
    detail::MapMat<S> Y(out.data(), m, n);
    Y.noalias() = X * W;
    Y.rowwise() += B;
  }
  return Tensor<S>::make_result(Shape{m, n}, std::move(out), {x, w, b},
                                [m, k, n](Node<S> &node) {
    detail::MapConstMat<S> G(node.grad.data(), m, n);
    if (S *gx = detail::grad_of(node, 0)) {
      detail::MapConstMat<S> W(node.parents[1]->data.data(), k, n);
      detail::MapMat<S>(gx, m, k).noalias() += G * W.transpose();
    }
    if (S *gw = detail::grad_of(node, 1)) {
      detail::MapConstMat<S> X(node.parents[0]->data.data(), m, k);
      detail::MapMat<S>(gw, k, n).noalias() += X.transpose() * G;
    }
    if (S *gb = detail::grad_of(node, 2)) {
      Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(gb, n) += G.colwise().sum();
    }
  });
}

template <typename S> Tensor<S> transpose(const Tensor<S> &a) {
  if (a.rank() != 2) throw DimensionError("transpose: needs a matrix, got " + to_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<S> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return Tensor<S>::make_result(Shape{n, m}, std::move(out), {a}, [m, n](Node<S> &node) {
    if (S *g = detail::grad_of(node, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += node.grad[j * m + i];
  });
}

/// sum_n weights[n] * items[n]; all items share one shape.
template <typename S>
Tensor<S> weighted_sum(const Tensor<S> &weights, const std::vector<Tensor<S>> &items) {
  if (items.empty() || weights.size() != items.size())
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) +
                         " weights for " + std::to_string(items.size()) + " items");
  for (const auto &it : items)
    detail::require_same_shape(items.front().shape(), it.shape(), "weighted_sum");
  const std::size_t len = items.front().size();
  std::vector<S> out(len, S(0));
  for (std::size_t k = 0; k < items.size(); ++k) {
    const S w = weights[k];
    const auto d = items[k].data();
    for (std::size_t i = 0; i < len; ++i) out[i] += w * d[i];
  }
  std::vector<Tensor<S>> parents{weights};
  parents.insert(parents.end(), items.begin(), items.end());
  const std::size_t count = items.size();
  return Tensor<S>::make_result(items.front().shape(), std::move(out), std::move(parents),
                                [count, len](Node<S> &node) {
    const auto &w = node.parents[0]->data;
    S *gw = detail::grad_of(node, 0);
    for (std::size_t k = 0; k < count; ++k) {
      const auto &item = node.parents[k + 1]->data;
      if (gw) {
        S dot = 0;
        for (std::size_t i = 0; i < len; ++i) dot += node.grad[i] * item[i];
        gw[k] += dot;
      }
      if (S *g = detail::grad_of(node, k + 1))
        for (std::size_t i = 0; i < len; ++i) g[i] += w[k] * node.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

template <typename S> Tensor<S> reshape(const Tensor<S> &x, Shape shape) {
  if (numel(shape) != x.size())
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " +
                         to_string(shape));
  return Tensor<S>::make_result(std::move(shape), x.to_vector(), {x}, [](Node<S> &n) {
    if (S *g = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

/// out axis i is input axis perm[i].
template <typename S>
Tensor<S> permute(const Tensor<S> &x, const std::vector<std::size_t> &perm) {
  const Shape &in_shape = x.shape();
  const std::size_t r = in_shape.size();
  if (perm.size() != r) throw DimensionError("permute: rank mismatch");
  Shape out_shape(r);
  std::vector<bool> used(r, false);
  for (std::size_t i = 0; i < r; ++i) {
    if (perm[i] >= r || used[perm[i]]) throw ArgumentError("permute: invalid permutation");
    used[perm[i]] = true;
    out_shape[i] = in_shape[perm[i]];
  }
  const Shape in_strides = detail::strides_of(in_shape);
  // source offset for each output element, walked with an odometer
  std::vector<std::size_t> src(x.size());
  {
    Shape idx(r, 0);
    Shape step(r);
    for (std::size_t i = 0; i < r; ++i) step[i] = in_strides[perm[i]];
    std::size_t offset = 0;
    for (std::size_t o = 0; o < src.size(); ++o) {
      src[o] = offset;
      for (std::size_t ax = r; ax-- > 0;) {
        if (++idx[ax] < out_shape[ax]) {
          offset += step[ax];
          break;
        }
        offset -= step[ax] * (out_shape[ax] - 1);
        idx[ax] = 0;
      }
    }
  }
  std::vector<S> out(x.size());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = x[src[o]];
  return Tensor<S>::make_result(std::move(out_shape), std::move(out), {x},
                                [src = std::move(src)](Node<S> &n) {
    if (S *g = detail::grad_of(n, 0))
      for (std::size_t o = 0; o < src.size(); ++o) g[src[o]] += n.grad[o];
  });
}

/// Concatenation along axis 0.
template <typename S> Tensor<S> concat_rows(const std::vector<Tensor<S>> &parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
  Shape tail(parts.front().shape().begin() + 1, parts.front().shape().end());
  std::size_t rows = 0;
  for (const auto &p : parts) {
    if (p.rank() == 0 || Shape(p.shape().begin() + 1, p.shape().end()) != tail)
      throw DimensionError("concat_rows: trailing shape mismatch " + to_string(p.shape()));
    rows += p.dim(0);
  }
  std::vector<S> out;
  out.reserve(rows * numel(tail));
  std::vector<std::size_t> offsets;
  for (const auto &p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  return Tensor<S>::make_result(std::move(shape), std::move(out), parts,
                                [offsets = std::move(offsets)](Node<S> &n) {
    for (std::size_t p = 0; p < offsets.size(); ++p)
      if (S *g = detail::grad_of(n, p)) {
        const std::size_t len = n.parents[p]->data.size();
        for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[offsets[p] + i];
      }
  });
}

/// Rows [begin, end) along axis 0.
template <typename S>
Tensor<S> slice_rows(const Tensor<S> &x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin > end || end > x.dim(0))
    throw DimensionError("slice_rows: range out of bounds for " + to_string(x.shape()));
  const std::size_t row = x.size() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  std::vector<S> out(x.data().begin() + static_cast<long>(begin * row),
                     x.data().begin() + static_cast<long>(end * row));
  return Tensor<S>::make_result(std::move(shape), std::move(out), {x},
                                [offset = begin * row](Node<S> &n) {
    if (S *g = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[offset + i] += n.grad[i];
  });
}

/// out[i] = x[index[i]] along axis 0.
template <typename S>
Tensor<S> gather_rows(const Tensor<S> &x, const std::vector<std::size_t> &index) {
  if (x.rank() == 0) throw DimensionError("gather_rows: scalar input");
  const std::size_t row = x.dim(0) ? x.size() / x.dim(0) : 0;
  for (std::size_t i : index)
    if (i >= x.dim(0)) throw DimensionError("gather_rows: index out of range");
  Shape shape = x.shape();
  shape[0] = index.size();
  std::vector<S> out(index.size() * row);
  for (std::size_t i = 0; i < index.size(); ++i)
    std::copy_n(x.data().begin() + static_cast<long>(index[i] * row), row,
                out.begin() + static_cast<long>(i * row));
  return Tensor<S>::make_result(std::move(shape), std::move(out), {x},
                                [index, row](Node<S> &n) {
    if (S *g = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < index.size(); ++i)
        for (std::size_t j = 0; j < row; ++j) g[index[i] * row + j] += n.grad[i * row + j];
  });
}

/// Stacks `count` copies of x along a new leading axis.
template <typename S> Tensor<S> expand_leading(const Tensor<S> &x, std::size_t count) {
  Shape shape{count};
  shape.insert(shape.end(), x.shape().begin(), x.shape().end());
  std::vector<S> out;
  out.reserve(count * x.size());
  for (std::size_t c = 0; c < count; ++c) out.insert(out.end(), x.data().begin(), x.data().end());
  return Tensor<S>::make_result(std::move(shape), std::move(out), {x},
                                [count](Node<S> &n) {
    S *g = detail::grad_of(n, 0);
    if (!g) return;
    const std::size_t len = n.parents[0]->data.size();
    for (std::size_t c = 0; c < count; ++c)
      for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[c * len + i];
  });
}

// ---------------------------------------------------------------------------
// Normalization / softmax
// ---------------------------------------------------------------------------

/// Softmax along `axis`, stabilized by max subtraction.
template <typename S> Tensor<S> softmax(const Tensor<S> &x, std::size_t axis) {
  if (axis >= x.rank())
    throw ArgumentError("softmax: axis " + std::to_string(axis) + " invalid for " +
                        to_string(x.shape()));
  const std::size_t len = x.dim(axis);
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t outer = x.size() / (len * inner);
  std::vector<S> out(x.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      S peak = x[base];
      for (std::size_t j = 1; j < len; ++j) peak = std::max(peak, x[base + j * inner]);
      S total = 0;
      for (std::size_t j = 0; j < len; ++j) {
        const S e = std::exp(x[base + j * inner] - peak);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  return Tensor<S>::make_result(x.shape(), std::move(out), {x},
                                [outer, inner, len](Node<S> &n) {
    S *g = detail::grad_of(n, 0);
    if (!g) return;
    const auto &y = n.data;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        S dot = 0;
        for (std::size_t j = 0; j < len; ++j) dot += n.grad[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t idx = base + j * inner;
          g[idx] += y[idx] * (n.grad[idx] - dot);
        }
      }
  });
}

/// Layer normalization over the last axis with affine gamma/beta.
template <typename S>
Tensor<S> layer_norm(const Tensor<S> &x, const Tensor<S> &gamma, const Tensor<S> &beta,
                     S eps = S(1e-6)) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d)
    throw DimensionError("layer_norm: affine size does not match last axis of " +
                         to_string(x.shape()));
  const std::size_t rows = x.size() / d;
  std::vector<S> out(x.size());
  std::vector<S> xhat(x.size());
  std::vector<S> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const S *row = x.data().data() + r * d;
    S mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<S>(d);
    S var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<S>(d);
    const S is = S(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const S h = (row[j] - mu) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gamma[j] + beta[j];
    }
  }
  return Tensor<S>::make_result(x.shape(), std::move(out), {x, gamma, beta},
                                [rows, d, xhat = std::move(xhat),
                                 inv_std = std::move(inv_std)](Node<S> &n) {
    const auto &gam = n.parents[1]->data;
    S *gx = detail::grad_of(n, 0);
    S *gg = detail::grad_of(n, 1);
    S *gb = detail::grad_of(n, 2);
    for (std::size_t r = 0; r < rows; ++r) {
      const S *go = n.grad.data() + r * d;
      const S *h = xhat.data() + r * d;
      if (gg)
        for (std::size_t j = 0; j < d; ++j) gg[j] += go[j] * h[j];
      if (gb)
        for (std::size_t j = 0; j < d; ++j) gb[j] += go[j];
      if (gx) {
        S mean_dh = 0, mean_dh_h = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const S dh = go[j] * gam[j];
          mean_dh += dh;
          mean_dh_h += dh * h[j];
        }
        mean_dh /= static_cast<S>(d);
        mean_dh_h /= static_cast<S>(d);
        for (std::size_t j = 0; j < d; ++j)
          gx[r * d + j] += inv_std[r] * (go[j] * gam[j] - mean_dh - h[j] * mean_dh_h);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Spatial
// ---------------------------------------------------------------------------

namespace detail {

struct LerpTap {
  std::size_t lo, hi;
  double frac;
};

/// Half-pixel-center taps with edge clamping.
inline std::vector<LerpTap> lerp_taps(std::size_t in, std::size_t out) {
  std::vector<LerpTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[o] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return taps;
}

} // namespace detail

/// Bilinear resize of the last two axes.
template <typename S>
Tensor<S> bilinear_resize(const Tensor<S> &x, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0)
    throw ArgumentError("bilinear_resize: target extents must be positive");
  if (x.rank() < 2) throw DimensionError("bilinear_resize: needs at least 2 axes");
  const std::size_t in_h = x.dim(x.rank() - 2), in_w = x.dim(x.rank() - 1);
  const std::size_t planes = x.size() / (in_h * in_w);
  auto ty = detail::lerp_taps(in_h, out_h);
  auto tx = detail::lerp_taps(in_w, out_w);
  std::vector<S> out(planes * out_h * out_w);
  for (std::size_t p = 0; p < planes; ++p) {
    const S *src = x.data().data() + p * in_h * in_w;
    S *dst = out.data() + p * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const S fy = static_cast<S>(ty[oy].frac);
      const S *r0 = src + ty[oy].lo * in_w;
      const S *r1 = src + ty[oy].hi * in_w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const S fx = static_cast<S>(tx[ox].frac);
        const S top = (S(1) - fx) * r0[tx[ox].lo] + fx * r0[tx[ox].hi];
        const S bot = (S(1) - fx) * r1[tx[ox].lo] + fx * r1[tx[ox].hi];
        dst[oy * out_w + ox] = (S(1) - fy) * top + fy * bot;
      }
    }
  }
  Shape shape = x.shape();
  shape[shape.size() - 2] = out_h;
  shape[shape.size() - 1] = out_w;
  return Tensor<S>::make_result(std::move(shape), std::move(out), {x},
                                [=, ty = std::move(ty), tx = std::move(tx)](Node<S> &n) {
    S *g = detail::grad_of(n, 0);
    if (!g) return;
    for (std::size_t p = 0; p < planes; ++p) {
      S *gs = g + p * in_h * in_w;
      const S *go = n.grad.data() + p * out_h * out_w;
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const S fy = static_cast<S>(ty[oy].frac);
        S *r0 = gs + ty[oy].lo * in_w;
        S *r1 = gs + ty[oy].hi * in_w;
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const S fx = static_cast<S>(tx[ox].frac);
          const S v = go[oy * out_w + ox];
          r0[tx[ox].lo] += (S(1) - fy) * (S(1) - fx) * v;
          r0[tx[ox].hi] += (S(1) - fy) * fx * v;
          r1[tx[ox].lo] += fy * (S(1) - fx) * v;
          r1[tx[ox].hi] += fy * fx * v;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

/// Multi-head scaled dot-product self-attention.
///
/// `qkv` is [rows x 3d] holding q | k | v column blocks. Rows are split into
/// consecutive groups of `group` rows; attention never crosses groups.
template <typename S>
Tensor<S> multi_head_attention(const Tensor<S> &qkv, std::size_t heads, std::size_t group) {
  if (qkv.rank() != 2 || qkv.dim(1) % 3 != 0)
    throw DimensionError("multi_head_attention: expected [rows x 3d], got " +
                         to_string(qkv.shape()));
  const std::size_t rows = qkv.dim(0), d = qkv.dim(1) / 3;
  if (heads == 0 || d % heads != 0) throw DimensionError("multi_head_attention: d % heads != 0");
  if (group == 0 || rows % group != 0)
    throw DimensionError("multi_head_attention: rows not divisible by group size");
  const std::size_t dh = d / heads, groups = rows / group;
  const S scale_factor = S(1) / std::sqrt(static_cast<S>(dh));
  const std::ptrdiff_t ld = static_cast<std::ptrdiff_t>(3 * d);
  const std::ptrdiff_t ldo = static_cast<std::ptrdiff_t>(d);
  std::vector<S> probs(groups * heads * group * group);
  std::vector<S> out(rows * d);
  const S *base = qkv.data().data();
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t h = 0; h < heads; ++h) {
      const S *q = base + g * group * 3 * d + h * dh;
      detail::StridedConstMat<S> Q(q, group, dh, Eigen::OuterStride<>(ld));
      detail::StridedConstMat<S> K(q + d, group, dh, Eigen::OuterStride<>(ld));
      detail::StridedConstMat<S> V(q + 2 * d, group, dh, Eigen::OuterStride<>(ld));
      detail::MapMat<S> P(probs.data() + (g * heads + h) * group * group, group, group);
      P.noalias() = (Q * K.transpose()) * scale_factor;
      for (std::size_t i = 0; i < group; ++i) {
        auto row = P.row(static_cast<Eigen::Index>(i));
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      }
      detail::StridedMat<S> O(out.data() + g * group * d + h * dh, group, dh,
                              Eigen::OuterStride<>(ldo));
      O.noalias() = P * V;
    }
  return Tensor<S>::make_result(Shape{rows, d}, std::move(out), {qkv},
                                [=, probs = std::move(probs)](Node<S> &n) {
    S *gqkv = detail::grad_of(n, 0);
    if (!gqkv) return;
    const S *src = n.parents[0]->data.data();
    detail::RowMat<S> dP(group, group);
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = g * group * 3 * d + h * dh;
        detail::StridedConstMat<S> Q(src + off, group, dh, Eigen::OuterStride<>(ld));
        detail::StridedConstMat<S> K(src + off + d, group, dh, Eigen::OuterStride<>(ld));
        detail::StridedConstMat<S> V(src + off + 2 * d, group, dh, Eigen::OuterStride<>(ld));
        detail::StridedMat<S> dQ(gqkv + off, group, dh, Eigen::OuterStride<>(ld));
        detail::StridedMat<S> dK(gqkv + off + d, group, dh, Eigen::OuterStride<>(ld));
        detail::StridedMat<S> dV(gqkv + off + 2 * d, group, dh, Eigen::OuterStride<>(ld));
        detail::MapConstMat<S> P(probs.data() + (g * heads + h) * group * group, group, group);
        detail::StridedConstMat<S> dO(n.grad.data() + g * group * d + h * dh, group, dh,
                                      Eigen::OuterStride<>(ldo));
        dV.noalias() += P.transpose() * dO;
        dP.noalias() = dO * V.transpose();
        for (std::size_t i = 0; i < group; ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          const S dot = dP.row(ii).dot(P.row(ii));
          dP.row(ii).array() = P.row(ii).array() * (dP.row(ii).array() - dot);
        }
        dQ.noalias() += (dP * K) * scale_factor;
        dK.noalias() += (dP.transpose() * Q) * scale_factor;
      }
  });
}

/// Attention of one learned query per head over the `steps` keys of each group.
///
/// keys:   [groups*steps x heads*key_dim]
/// query:  [heads x key_dim]
/// values: [groups*steps x width], width split evenly into heads channel groups
/// returns [groups x width]
template <typename S>
Tensor<S> master_query_attention(const Tensor<S> &keys, const Tensor<S> &query,
                                 const Tensor<S> &values, std::size_t steps) {
  if (query.rank() != 2 || keys.rank() != 2 || values.rank() != 2)
    throw DimensionError("master_query_attention: expected matrices");
  const std::size_t heads = query.dim(0), key_dim = query.dim(1);
  const std::size_t rows = keys.dim(0), width = values.dim(1);
  if (keys.dim(1) != heads * key_dim || values.dim(0) != rows)
    throw DimensionError("master_query_attention: keys " + to_string(keys.shape()) +
                         ", query " + to_string(query.shape()) + ", values " +
                         to_string(values.shape()) + " are inconsistent");
  if (steps == 0 || rows % steps != 0 || width % heads != 0)
    throw DimensionError("master_query_attention: rows or width not divisible");
  const std::size_t groups = rows / steps, vh = width / heads;
  const S inv_temp = S(1) / std::sqrt(static_cast<S>(key_dim));
  std::vector<S> attn(groups * heads * steps);
  std::vector<S> out(groups * width, S(0));
  const S *K = keys.data().data();
  const S *Q = query.data().data();
  const S *V = values.data().data();
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t h = 0; h < heads; ++h) {
      S *a = attn.data() + (g * heads + h) * steps;
      S peak = -std::numeric_limits<S>::infinity();
      for (std::size_t t = 0; t < steps; ++t) {
        const S *k = K + (g * steps + t) * heads * key_dim + h * key_dim;
        S s = 0;
        for (std::size_t j = 0; j < key_dim; ++j) s += Q[h * key_dim + j] * k[j];
        a[t] = s * inv_temp;
        peak = std::max(peak, a[t]);
      }
      S total = 0;
      for (std::size_t t = 0; t < steps; ++t) {
        a[t] = std::exp(a[t] - peak);
        total += a[t];
      }
      for (std::size_t t = 0; t < steps; ++t) a[t] /= total;
      S *o = out.data() + g * width + h * vh;
      for (std::size_t t = 0; t < steps; ++t) {
        const S *v = V + (g * steps + t) * width + h * vh;
        for (std::size_t j = 0; j < vh; ++j) o[j] += a[t] * v[j];
      }
    }
  return Tensor<S>::make_result(Shape{groups, width}, std::move(out), {keys, query, values},
                                [=, attn = std::move(attn)](Node<S> &n) {
    const S *Kp = n.parents[0]->data.data();
    const S *Qp = n.parents[1]->data.data();
    const S *Vp = n.parents[2]->data.data();
    S *gk = detail::grad_of(n, 0);
    S *gq = detail::grad_of(n, 1);
    S *gv = detail::grad_of(n, 2);
    std::vector<S> ds(steps);
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t h = 0; h < heads; ++h) {
        const S *a = attn.data() + (g * heads + h) * steps;
        const S *go = n.grad.data() + g * width + h * vh;
        S weighted = 0;
        for (std::size_t t = 0; t < steps; ++t) {
          const S *v = Vp + (g * steps + t) * width + h * vh;
          S da = 0;
          for (std::size_t j = 0; j < vh; ++j) da += go[j] * v[j];
          ds[t] = da;
          weighted += a[t] * da;
          if (gv) {
            S *dv = gv + (g * steps + t) * width + h * vh;
            for (std::size_t j = 0; j < vh; ++j) dv[j] += a[t] * go[j];
          }
        }
        for (std::size_t t = 0; t < steps; ++t) {
          const S dscore = a[t] * (ds[t] - weighted) * inv_temp;
          const std::size_t koff = (g * steps + t) * heads * key_dim + h * key_dim;
          for (std::size_t j = 0; j < key_dim; ++j) {
            if (gq) gq[h * key_dim + j] += dscore * Kp[koff + j];
            if (gk) gk[koff + j] += dscore * Qp[h * key_dim + j];
          }
        }
      }
  });
}

} // namespace ramen
