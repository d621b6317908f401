// SPDX-License-Identifier: Apache-2.0
//
// Dense training kernels: matmul, 2-D convolution, causal depthwise 1-D
// convolution, and the selective state-space scan, each with forward and
// backward passes.
//
// Every kernel exists twice: the primary variant in xlm::kern parallelizes
// with OpenMP, and a plain serial variant in xlm::kern::ref serves as the
// reference oracle in tests and benchmarks.  matmul, dwconv1d and scan
// accumulate every output element in the same fixed index order in both
// variants, and parallelism is only ever over independent outputs, so their
// results are bitwise identical between the two variants and across thread
// counts.  The primary conv2d is an im2col + matmul formulation whose
// rounding may differ from the direct reference at the last ulp; tests
// compare it to the reference with a tight tolerance instead.
//
// Shapes are row-major.  Backward kernels either own disjoint outputs per
// thread or reduce in a fixed order, so they are race-free without atomics.

#pragma once

#include <cstddef>

namespace xlm::kern {

// c[m,n] (+)= a[m,k] * b[k,n]
template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n,
            bool accumulate = false);

// c[m,n] (+)= a[m,k] * b[n,k]^T
template <class T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n,
               bool accumulate = false);

// c[m,n] (+)= a[k,m]^T * b[k,n]
template <class T>
void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n,
               bool accumulate = false);

// out[co,ho,wo] = bias[co] + sum_{ci,ky,kx} w[co,ci,ky,kx] *
//                 in[ci, ho*stride - pad + ky, wo*stride - pad + kx]
// bias may be null.  Out-of-range taps read zero.
template <class T>
void conv2d_fwd(const T* in, const T* w, const T* bias, T* out, int c_in,
                int h, int wdt, int c_out, int kh, int kw, int stride,
                int pad);

template <class T>
void conv2d_bwd_input(const T* dout, const T* w, T* din, int c_in, int h,
                      int wdt, int c_out, int kh, int kw, int stride,
                      int pad);

template <class T>
void conv2d_bwd_weight(const T* dout, const T* in, T* dw, int c_in, int h,
                       int wdt, int c_out, int kh, int kw, int stride,
                       int pad);

template <class T>
void conv2d_bwd_bias(const T* dout, T* db, int c_out, int ho, int wo);

inline int conv_out_dim(int extent, int k, int stride, int pad) {
  return (extent + 2 * pad - k) / stride + 1;
}

// Causal depthwise convolution over [D, L]: w[d, taps-1] multiplies the
// current step, earlier taps reach back in time, out-of-range reads are 0.
template <class T>
void dwconv1d_fwd(const T* in, const T* w, const T* bias, T* out, int d,
                  int l, int taps);

template <class T>
void dwconv1d_bwd_input(const T* dout, const T* w, T* din, int d, int l,
                        int taps);

template <class T>
void dwconv1d_bwd_weight(const T* dout, const T* in, T* dw, int d, int l,
                         int taps);

template <class T>
void dwconv1d_bwd_bias(const T* dout, T* db, int d, int l);

// Selective scan over a length-L sequence of D channels with S states per
// channel:
//   s[t] = abar[t,d,:] * s[t-1] + bbar[t,d,:] * x[t,d],    s[-1] = 0
//   y[t,d] = sum_j ct[t,j] * s[t][j]
// `states` stores s after every step ([L, D, S]) for the backward pass.
template <class T>
void scan_fwd(const T* x, const T* abar, const T* bbar, const T* ct, T* y,
              T* states, int l, int d, int s);

// Backward of the scan.  dct must be sized [L, S]; the rest mirror their
// forward counterparts.  All outputs are overwritten.
template <class T>
void scan_bwd(const T* dy, const T* x, const T* abar, const T* bbar,
              const T* ct, const T* states, T* dx, T* dabar, T* dbbar,
              T* dct, int l, int d, int s);

namespace ref {

template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n,
            bool accumulate = false);

template <class T>
void conv2d_fwd(const T* in, const T* w, const T* bias, T* out, int c_in,
                int h, int wdt, int c_out, int kh, int kw, int stride,
                int pad);

template <class T>
void dwconv1d_fwd(const T* in, const T* w, const T* bias, T* out, int d,
                  int l, int taps);

// Direct statement of the recurrence, one step at a time, no parallelism.
template <class T>
void scan_fwd(const T* x, const T* abar, const T* bbar, const T* ct, T* y,
              T* states, int l, int d, int s);

}  // namespace ref

}  // namespace xlm::kern
