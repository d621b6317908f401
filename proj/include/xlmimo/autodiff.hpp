// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation on dense arrays.
//
// Model quantities live in Array<T> (shape + contiguous row-major values +
// optional gradient buffer).  Ops compute their result eagerly and, when
// any input carries requires_grad, push a closure onto the Tape; calling
// Tape::backward replays the closures in reverse, accumulating gradients
// additively.  Training uses T = float; gradient checking instantiates the
// same code with T = double.
//
// Broadcasting is deliberately minimal: the second operand of add/sub/mul
// may be a scalar or a suffix of the first operand's shape (the bias-add
// cases); its adjoint sums over the broadcast leading extents.
//
// All reductions run in a fixed serial order, so training is bitwise
// reproducible for a given seed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "xlmimo/common.hpp"
#include "xlmimo/kernels.hpp"

namespace xlm::ad {

template <class T>
struct Array {
  std::vector<int> shape;
  std::vector<T> val;
  std::vector<T> grad;  // same size as val iff requires_grad
  bool requires_grad = false;

  std::size_t numel() const { return val.size(); }

  void ensure_grad() {
    requires_grad = true;
    if (grad.size() != val.size()) grad.assign(val.size(), T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <class T>
using ArrP = std::shared_ptr<Array<T>>;

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int e : shape) {
    if (e < 0) throw InvalidParameter("array: negative shape extent");
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

template <class T>
ArrP<T> make_array(std::vector<int> shape, bool requires_grad = false) {
  auto a = std::make_shared<Array<T>>();
  a->shape = std::move(shape);
  a->val.assign(shape_numel(a->shape), T(0));
  if (requires_grad) a->ensure_grad();
  return a;
}

// Trainable parameter (gradient buffer always present).
template <class T>
ArrP<T> make_param(std::vector<int> shape) {
  return make_array<T>(std::move(shape), true);
}

template <class T>
class Tape {
 public:
  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

  std::size_t size() const { return ops_.size(); }

  void backward(const ArrP<T>& loss) {
    if (loss->numel() != 1)
      throw InvalidParameter("backward: loss must be scalar");
    if (!loss->requires_grad)
      throw InvalidParameter("backward: loss does not depend on parameters");
    loss->grad[0] += T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    ops_.clear();
  }

  void clear() { ops_.clear(); }

 private:
  std::vector<std::function<void()>> ops_;
};

namespace detail {

template <class T>
ArrP<T> result_like(std::vector<int> shape, bool rg) {
  return make_array<T>(std::move(shape), rg);
}

// Validate that b's shape is equal to a's, a suffix of it, or scalar.
// Returns the number of leading a-elements each b-element covers.
template <class T>
std::size_t broadcast_repeat(const ArrP<T>& a, const ArrP<T>& b,
                             const char* op) {
  if (b->numel() == 1) return a->numel();
  const auto& sa = a->shape;
  const auto& sb = b->shape;
  if (sb.size() > sa.size())
    throw InvalidParameter(std::string(op) + ": shape mismatch " +
                           shape_str(sa) + " vs " + shape_str(sb));
  for (std::size_t i = 0; i < sb.size(); ++i)
    if (sb[i] != sa[sa.size() - sb.size() + i])
      throw InvalidParameter(std::string(op) + ": shape mismatch " +
                             shape_str(sa) + " vs " + shape_str(sb));
  return a->numel() / b->numel();
}

// Split a shape at `axis` into outer/span/inner extents.
inline void axis_extents(const std::vector<int>& shape, int axis,
                         std::size_t& outer, std::size_t& span,
                         std::size_t& inner) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    throw InvalidParameter("axis out of range");
  outer = inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(shape[i]);
  span = static_cast<std::size_t>(shape[axis]);
  for (std::size_t i = axis + 1; i < shape.size(); ++i)
    inner *= static_cast<std::size_t>(shape[i]);
}

}  // namespace detail

// -------------------------------------------------------------- elementwise

template <class T, class FwdFn, class BwdFn>
ArrP<T> unary_map(Tape<T>& tape, const ArrP<T>& a, FwdFn fwd, BwdFn dfdx) {
  auto out = detail::result_like<T>(a->shape, a->requires_grad);
  for (std::size_t i = 0; i < a->numel(); ++i) out->val[i] = fwd(a->val[i]);
  if (out->requires_grad)
    tape.record([a, out, dfdx]() {
      for (std::size_t i = 0; i < a->numel(); ++i)
        a->grad[i] += out->grad[i] * dfdx(a->val[i], out->val[i]);
    });
  return out;
}

template <class T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
T softplus_scalar(T x) {
  if (x > T(30)) return x;
  if (x < T(-30)) return std::exp(x);
  return std::log1p(std::exp(x));
}

template <class T>
ArrP<T> exp_(Tape<T>& tape, const ArrP<T>& a) {
  return unary_map(
      tape, a, [](T x) { return std::exp(x); },
      [](T, T y) { return y; });
}

template <class T>
ArrP<T> sigmoid(Tape<T>& tape, const ArrP<T>& a) {
  return unary_map(
      tape, a, [](T x) { return sigmoid_scalar(x); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
ArrP<T> softplus(Tape<T>& tape, const ArrP<T>& a) {
  return unary_map(
      tape, a, [](T x) { return softplus_scalar(x); },
      [](T x, T) { return sigmoid_scalar(x); });
}

template <class T>
ArrP<T> silu(Tape<T>& tape, const ArrP<T>& a) {
  return unary_map(
      tape, a, [](T x) { return x * sigmoid_scalar(x); },
      [](T x, T) {
        const T s = sigmoid_scalar(x);
        return s * (T(1) + x * (T(1) - s));
      });
}

template <class T>
ArrP<T> scale(Tape<T>& tape, const ArrP<T>& a, T c) {
  auto out = detail::result_like<T>(a->shape, a->requires_grad);
  for (std::size_t i = 0; i < a->numel(); ++i) out->val[i] = c * a->val[i];
  if (out->requires_grad)
    tape.record([a, out, c]() {
      for (std::size_t i = 0; i < a->numel(); ++i)
        a->grad[i] += c * out->grad[i];
    });
  return out;
}

// ----------------------------------------------------- binary, broadcast b

template <class T, class Combine, class DA, class DB>
ArrP<T> binary_map(Tape<T>& tape, const ArrP<T>& a, const ArrP<T>& b,
                   const char* name, Combine comb, DA da, DB db) {
  detail::broadcast_repeat(a, b, name);
  const std::size_t nb = b->numel();
  auto out = detail::result_like<T>(a->shape,
                                    a->requires_grad || b->requires_grad);
  for (std::size_t i = 0; i < a->numel(); ++i)
    out->val[i] = comb(a->val[i], b->val[i % nb]);
  if (out->requires_grad)
    tape.record([a, b, out, da, db, nb]() {
      if (a->requires_grad)
        for (std::size_t i = 0; i < a->numel(); ++i)
          a->grad[i] += out->grad[i] * da(a->val[i], b->val[i % nb]);
      if (b->requires_grad)
        for (std::size_t i = 0; i < a->numel(); ++i)
          b->grad[i % nb] += out->grad[i] * db(a->val[i], b->val[i % nb]);
    });
  return out;
}

template <class T>
ArrP<T> add(Tape<T>& tape, const ArrP<T>& a, const ArrP<T>& b) {
  return binary_map(
      tape, a, b, "add", [](T x, T y) { return x + y; },
      [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <class T>
ArrP<T> sub(Tape<T>& tape, const ArrP<T>& a, const ArrP<T>& b) {
  return binary_map(
      tape, a, b, "sub", [](T x, T y) { return x - y; },
      [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <class T>
ArrP<T> mul(Tape<T>& tape, const ArrP<T>& a, const ArrP<T>& b) {
  return binary_map(
      tape, a, b, "mul", [](T x, T y) { return x * y; },
      [](T, T y) { return y; }, [](T x, T) { return x; });
}

// NOTE on the broadcast adjoint: b->grad[i % nb] accumulates over all
// leading repeats in ascending i order, which matches an explicit
// tile-then-sum oracle exactly.

// ------------------------------------------------------------------ matmul

template <class T>
ArrP<T> matmul(Tape<T>& tape, const ArrP<T>& a, const ArrP<T>& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 ||
      a->shape[1] != b->shape[0])
    throw InvalidParameter("matmul: need [m,k]x[k,n], got " +
                           shape_str(a->shape) + " x " + shape_str(b->shape));
  const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
  auto out = detail::result_like<T>({m, n},
                                    a->requires_grad || b->requires_grad);
  kern::matmul(a->val.data(), b->val.data(), out->val.data(), m, k, n);
  if (out->requires_grad)
    tape.record([a, b, out, m, k, n]() {
      if (a->requires_grad)
        kern::matmul_nt(out->grad.data(), b->val.data(), a->grad.data(), m,
                        n, k, /*accumulate=*/true);
      if (b->requires_grad)
        kern::matmul_tn(a->val.data(), out->grad.data(), b->grad.data(), k,
                        m, n, /*accumulate=*/true);
    });
  return out;
}

// ------------------------------------------------------------------- conv2d

template <class T>
ArrP<T> conv2d(Tape<T>& tape, const ArrP<T>& x, const ArrP<T>& w,
               const ArrP<T>& bias, int stride, int pad) {
  if (x->shape.size() != 3 || w->shape.size() != 4 ||
      w->shape[1] != x->shape[0])
    throw InvalidParameter("conv2d: need x[c,h,w], w[co,c,kh,kw], got " +
                           shape_str(x->shape) + " and " + shape_str(w->shape));
  const int c_in = x->shape[0], h = x->shape[1], wd = x->shape[2];
  const int c_out = w->shape[0], kh = w->shape[2], kw = w->shape[3];
  if (bias && (bias->shape.size() != 1 || bias->shape[0] != c_out))
    throw InvalidParameter("conv2d: bias shape mismatch");
  if (stride < 1 || pad < 0)
    throw InvalidParameter("conv2d: bad stride/pad");
  const int ho = kern::conv_out_dim(h, kh, stride, pad);
  const int wo = kern::conv_out_dim(wd, kw, stride, pad);
  if (ho < 1 || wo < 1) throw InvalidParameter("conv2d: empty output");
  const bool rg = x->requires_grad || w->requires_grad ||
                  (bias && bias->requires_grad);
  auto out = detail::result_like<T>({c_out, ho, wo}, rg);
  kern::conv2d_fwd(x->val.data(), w->val.data(),
                   bias ? bias->val.data() : nullptr, out->val.data(), c_in,
                   h, wd, c_out, kh, kw, stride, pad);
  if (rg)
    tape.record([x, w, bias, out, c_in, h, wd, c_out, kh, kw, stride, pad,
                 ho, wo]() {
      if (x->requires_grad) {
        std::vector<T> din(x->numel());
        kern::conv2d_bwd_input(out->grad.data(), w->val.data(), din.data(),
                               c_in, h, wd, c_out, kh, kw, stride, pad);
        for (std::size_t i = 0; i < din.size(); ++i) x->grad[i] += din[i];
      }
      if (w->requires_grad) {
        std::vector<T> dw(w->numel());
        kern::conv2d_bwd_weight(out->grad.data(), x->val.data(), dw.data(),
                                c_in, h, wd, c_out, kh, kw, stride, pad);
        for (std::size_t i = 0; i < dw.size(); ++i) w->grad[i] += dw[i];
      }
      if (bias && bias->requires_grad) {
        std::vector<T> db(bias->numel());
        kern::conv2d_bwd_bias(out->grad.data(), db.data(), c_out, ho, wo);
        for (std::size_t i = 0; i < db.size(); ++i) bias->grad[i] += db[i];
      }
    });
  return out;
}

// ------------------------------------------------------- depthwise conv 1d

template <class T>
ArrP<T> dwconv1d_causal(Tape<T>& tape, const ArrP<T>& x, const ArrP<T>& w,
                        const ArrP<T>& bias) {
  if (x->shape.size() != 2 || w->shape.size() != 2 ||
      w->shape[0] != x->shape[0])
    throw InvalidParameter("dwconv1d: need x[d,l], w[d,taps], got " +
                           shape_str(x->shape) + " and " + shape_str(w->shape));
  const int d = x->shape[0], l = x->shape[1], taps = w->shape[1];
  if (bias && (bias->shape.size() != 1 || bias->shape[0] != d))
    throw InvalidParameter("dwconv1d: bias shape mismatch");
  const bool rg = x->requires_grad || w->requires_grad ||
                  (bias && bias->requires_grad);
  auto out = detail::result_like<T>({d, l}, rg);
  kern::dwconv1d_fwd(x->val.data(), w->val.data(),
                     bias ? bias->val.data() : nullptr, out->val.data(), d,
                     l, taps);
  if (rg)
    tape.record([x, w, bias, out, d, l, taps]() {
      if (x->requires_grad) {
        std::vector<T> din(x->numel());
        kern::dwconv1d_bwd_input(out->grad.data(), w->val.data(), din.data(),
                                 d, l, taps);
        for (std::size_t i = 0; i < din.size(); ++i) x->grad[i] += din[i];
      }
      if (w->requires_grad) {
        std::vector<T> dw(w->numel());
        kern::dwconv1d_bwd_weight(out->grad.data(), x->val.data(), dw.data(),
                                  d, l, taps);
        for (std::size_t i = 0; i < dw.size(); ++i) w->grad[i] += dw[i];
      }
      if (bias && bias->requires_grad) {
        std::vector<T> db(bias->numel());
        kern::dwconv1d_bwd_bias(out->grad.data(), db.data(), d, l);
        for (std::size_t i = 0; i < db.size(); ++i) bias->grad[i] += db[i];
      }
    });
  return out;
}

// ------------------------------------------------------------ shape moves

template <class T>
ArrP<T> reshape(Tape<T>& tape, const ArrP<T>& a, std::vector<int> shape) {
  if (shape_numel(shape) != a->numel())
    throw InvalidParameter("reshape: element count mismatch " +
                           shape_str(a->shape) + " -> " + shape_str(shape));
  auto out = detail::result_like<T>(std::move(shape), a->requires_grad);
  out->val = a->val;
  if (out->requires_grad)
    tape.record([a, out]() {
      for (std::size_t i = 0; i < a->numel(); ++i)
        a->grad[i] += out->grad[i];
    });
  return out;
}

template <class T>
ArrP<T> transpose2(Tape<T>& tape, const ArrP<T>& a) {
  if (a->shape.size() != 2)
    throw InvalidParameter("transpose2: need a matrix, got " +
                           shape_str(a->shape));
  const int r = a->shape[0], c = a->shape[1];
  auto out = detail::result_like<T>({c, r}, a->requires_grad);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out->val[static_cast<std::size_t>(j) * r + i] =
          a->val[static_cast<std::size_t>(i) * c + j];
  if (out->requires_grad)
    tape.record([a, out, r, c]() {
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          a->grad[static_cast<std::size_t>(i) * c + j] +=
              out->grad[static_cast<std::size_t>(j) * r + i];
    });
  return out;
}

template <class T>
ArrP<T> concat(Tape<T>& tape, const ArrP<T>& a, const ArrP<T>& b, int axis) {
  if (a->shape.size() != b->shape.size())
    throw InvalidParameter("concat: rank mismatch");
  for (std::size_t i = 0; i < a->shape.size(); ++i)
    if (static_cast<int>(i) != axis && a->shape[i] != b->shape[i])
      throw InvalidParameter("concat: shape mismatch " + shape_str(a->shape) +
                             " vs " + shape_str(b->shape));
  std::size_t outer, span_a, span_b, inner;
  detail::axis_extents(a->shape, axis, outer, span_a, inner);
  {
    std::size_t o2, i2;
    detail::axis_extents(b->shape, axis, o2, span_b, i2);
  }
  std::vector<int> shape = a->shape;
  shape[axis] = static_cast<int>(span_a + span_b);
  auto out = detail::result_like<T>(std::move(shape),
                                    a->requires_grad || b->requires_grad);
  const std::size_t ia = span_a * inner, ib = span_b * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a->val.data() + o * ia, ia,
                out->val.data() + o * (ia + ib));
    std::copy_n(b->val.data() + o * ib, ib,
                out->val.data() + o * (ia + ib) + ia);
  }
  if (out->requires_grad)
    tape.record([a, b, out, outer, ia, ib]() {
      for (std::size_t o = 0; o < outer; ++o) {
        if (a->requires_grad)
          for (std::size_t i = 0; i < ia; ++i)
            a->grad[o * ia + i] += out->grad[o * (ia + ib) + i];
        if (b->requires_grad)
          for (std::size_t i = 0; i < ib; ++i)
            b->grad[o * ib + i] += out->grad[o * (ia + ib) + ia + i];
      }
    });
  return out;
}

template <class T>
ArrP<T> slice(Tape<T>& tape, const ArrP<T>& a, int axis, int start, int len) {
  std::size_t outer, span, inner;
  detail::axis_extents(a->shape, axis, outer, span, inner);
  if (start < 0 || len < 1 || static_cast<std::size_t>(start + len) > span)
    throw InvalidParameter("slice: range out of bounds");
  std::vector<int> shape = a->shape;
  shape[axis] = len;
  auto out = detail::result_like<T>(std::move(shape), a->requires_grad);
  const std::size_t row_in = span * inner;
  const std::size_t row_out = static_cast<std::size_t>(len) * inner;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(a->val.data() + o * row_in + start * inner, row_out,
                out->val.data() + o * row_out);
  if (out->requires_grad)
    tape.record([a, out, outer, row_in, row_out, start, inner]() {
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < row_out; ++i)
          a->grad[o * row_in + start * inner + i] +=
              out->grad[o * row_out + i];
    });
  return out;
}

template <class T>
ArrP<T> upsample2x(Tape<T>& tape, const ArrP<T>& a) {
  if (a->shape.size() != 3)
    throw InvalidParameter("upsample2x: need [c,h,w], got " +
                           shape_str(a->shape));
  const int c = a->shape[0], h = a->shape[1], w = a->shape[2];
  auto out = detail::result_like<T>({c, 2 * h, 2 * w}, a->requires_grad);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const T v = a->val[(static_cast<std::size_t>(ch) * h + y) * w + x];
        const std::size_t base =
            (static_cast<std::size_t>(ch) * 2 * h + 2 * y) * 2 * w + 2 * x;
        out->val[base] = v;
        out->val[base + 1] = v;
        out->val[base + 2 * w] = v;
        out->val[base + 2 * w + 1] = v;
      }
  if (out->requires_grad)
    tape.record([a, out, c, h, w]() {
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const std::size_t base =
                (static_cast<std::size_t>(ch) * 2 * h + 2 * y) * 2 * w +
                2 * x;
            a->grad[(static_cast<std::size_t>(ch) * h + y) * w + x] +=
                out->grad[base] + out->grad[base + 1] +
                out->grad[base + 2 * w] + out->grad[base + 2 * w + 1];
          }
    });
  return out;
}

template <class T>
ArrP<T> mean_pool_hw(Tape<T>& tape, const ArrP<T>& a) {
  if (a->shape.size() != 3)
    throw InvalidParameter("mean_pool_hw: need [c,h,w], got " +
                           shape_str(a->shape));
  const int c = a->shape[0];
  const std::size_t hw =
      static_cast<std::size_t>(a->shape[1]) * a->shape[2];
  auto out = detail::result_like<T>({c}, a->requires_grad);
  for (int ch = 0; ch < c; ++ch) {
    T acc = T(0);
    for (std::size_t i = 0; i < hw; ++i) acc += a->val[ch * hw + i];
    out->val[ch] = acc / static_cast<T>(hw);
  }
  if (out->requires_grad)
    tape.record([a, out, c, hw]() {
      for (int ch = 0; ch < c; ++ch) {
        const T g = out->grad[ch] / static_cast<T>(hw);
        for (std::size_t i = 0; i < hw; ++i) a->grad[ch * hw + i] += g;
      }
    });
  return out;
}

// -------------------------------------------------------------------- loss

template <class T>
ArrP<T> mse(Tape<T>& tape, const ArrP<T>& a, const ArrP<T>& b) {
  if (a->shape != b->shape)
    throw InvalidParameter("mse: shape mismatch " + shape_str(a->shape) +
                           " vs " + shape_str(b->shape));
  const std::size_t n = a->numel();
  if (n == 0) throw InvalidParameter("mse: empty input");
  auto out = detail::result_like<T>({1},
                                    a->requires_grad || b->requires_grad);
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T d = a->val[i] - b->val[i];
    acc += d * d;
  }
  out->val[0] = acc / static_cast<T>(n);
  if (out->requires_grad)
    tape.record([a, b, out, n]() {
      const T g = out->grad[0] * T(2) / static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const T d = a->val[i] - b->val[i];
        if (a->requires_grad) a->grad[i] += g * d;
        if (b->requires_grad) b->grad[i] -= g * d;
      }
    });
  return out;
}

// ----------------------------------------------------------- optimization

template <class T>
class Adam {
 public:
  Adam(std::vector<ArrP<T>> params, T lr)
      : params_(std::move(params)), lr_(lr) {
    slots_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      slots_[i].m.assign(params_[i]->numel(), T(0));
      slots_[i].v.assign(params_[i]->numel(), T(0));
    }
  }

  void step() {
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Array<T>& p = *params_[i];
      auto& m = slots_[i].m;
      auto& v = slots_[i].v;
      for (std::size_t j = 0; j < p.numel(); ++j) {
        const T g = p.grad[j];
        m[j] = beta1_ * m[j] + (T(1) - beta1_) * g;
        v[j] = beta2_ * v[j] + (T(1) - beta2_) * g * g;
        p.val[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  void set_lr(T lr) { lr_ = lr; }
  long long steps_taken() const { return t_; }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  std::vector<ArrP<T>> params_;
  std::vector<Slot> slots_;
  T lr_;
  T beta1_ = T(0.9), beta2_ = T(0.999), eps_ = T(1e-8);
  long long t_ = 0;
};

// -------------------------------------------------------- gradient checks

// Maximum relative error between reverse-mode and central-difference
// gradients over every element of every leaf.  `build` is called with a
// fresh tape for each evaluation and must return a scalar.  `floor` guards
// the denominator: central differences carry rounding noise of roughly
// |loss| * 2^-52 / eps, so gradients far below that floor are effectively
// compared absolutely instead of drowning the check in noise.
template <class Build>
double grad_check_max_rel_err(Build&& build,
                              const std::vector<ArrP<double>>& leaves,
                              double eps = 1e-5, double floor = 1e-8) {
  Tape<double> tape;
  ArrP<double> loss = build(tape);
  if (loss->numel() != 1)
    throw InvalidParameter("grad_check: loss must be scalar");
  for (const auto& leaf : leaves) leaf->zero_grad();
  tape.backward(loss);
  std::vector<std::vector<double>> ad_grads;
  ad_grads.reserve(leaves.size());
  for (const auto& leaf : leaves) ad_grads.push_back(leaf->grad);

  const auto eval = [&]() {
    Tape<double> t2;
    ArrP<double> l2 = build(t2);
    t2.clear();
    return l2->val[0];
  };

  double max_rel = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Array<double>& leaf = *leaves[li];
    for (std::size_t i = 0; i < leaf.numel(); ++i) {
      const double keep = leaf.val[i];
      leaf.val[i] = keep + eps;
      const double up = eval();
      leaf.val[i] = keep - eps;
      const double dn = eval();
      leaf.val[i] = keep;
      const double fd = (up - dn) / (2.0 * eps);
      const double g = ad_grads[li][i];
      const double rel =
          std::abs(fd - g) / std::max(floor, std::abs(fd) + std::abs(g));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace xlm::ad
