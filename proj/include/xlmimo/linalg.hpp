// SPDX-License-Identifier: Apache-2.0
//
// Small dense complex linear algebra used by the channel synthesizer and
// the classical estimators.  Row-major storage, double precision.  The
// problem sizes here are tiny (hundreds of rows), so the implementations
// favour clarity and a fixed, reproducible operation order over speed.

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "xlmimo/common.hpp"

namespace xlm {

struct CMat {
  int rows = 0;
  int cols = 0;
  std::vector<cdouble> a;

  CMat() = default;
  CMat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c) {}

  cdouble& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  const cdouble& at(int r, int c) const {
    return a[static_cast<std::size_t>(r) * cols + c];
  }
  cdouble* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const cdouble* row(int r) const {
    return a.data() + static_cast<std::size_t>(r) * cols;
  }
  std::size_t size() const { return a.size(); }
};

// y = M x
inline std::vector<cdouble> matvec(const CMat& m, const std::vector<cdouble>& x) {
  if (static_cast<int>(x.size()) != m.cols)
    throw InvalidParameter("matvec: dimension mismatch");
  std::vector<cdouble> y(m.rows);
  for (int r = 0; r < m.rows; ++r) {
    cdouble acc = 0.0;
    const cdouble* mr = m.row(r);
    for (int c = 0; c < m.cols; ++c) acc += mr[c] * x[c];
    y[r] = acc;
  }
  return y;
}

// y = M^H x
inline std::vector<cdouble> matvec_herm(const CMat& m,
                                        const std::vector<cdouble>& x) {
  if (static_cast<int>(x.size()) != m.rows)
    throw InvalidParameter("matvec_herm: dimension mismatch");
  std::vector<cdouble> y(m.cols, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    const cdouble xr = x[r];
    const cdouble* mr = m.row(r);
    for (int c = 0; c < m.cols; ++c) y[c] += std::conj(mr[c]) * xr;
  }
  return y;
}

// G = M M^H (Hermitian, rows x rows)
inline CMat gram_right(const CMat& m) {
  CMat g(m.rows, m.rows);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j <= i; ++j) {
      cdouble acc = 0.0;
      const cdouble* mi = m.row(i);
      const cdouble* mj = m.row(j);
      for (int c = 0; c < m.cols; ++c) acc += mi[c] * std::conj(mj[c]);
      g.at(i, j) = acc;
      g.at(j, i) = std::conj(acc);
    }
  }
  return g;
}

inline double fro_norm_sq(const CMat& m) {
  double s = 0.0;
  for (const cdouble& v : m.a) s += std::norm(v);
  return s;
}

inline double norm_sq(const std::vector<cdouble>& v) {
  double s = 0.0;
  for (const cdouble& x : v) s += std::norm(x);
  return s;
}

// In-place lower Cholesky factor of a Hermitian positive definite matrix.
// Throws std::runtime_error if a pivot falls below `min_pivot`, which is
// how rank deficiency of the underlying system surfaces.
class CholeskyHerm {
 public:
  explicit CholeskyHerm(const CMat& g, double min_pivot = 0.0) : l_(g) {
    const int n = g.rows;
    if (g.cols != n) throw InvalidParameter("cholesky: matrix not square");
    for (int j = 0; j < n; ++j) {
      double diag = l_.at(j, j).real();
      for (int k = 0; k < j; ++k) diag -= std::norm(l_.at(j, k));
      if (!(diag > min_pivot))
        throw std::runtime_error("cholesky: matrix not positive definite");
      const double ljj = std::sqrt(diag);
      l_.at(j, j) = ljj;
      for (int i = j + 1; i < n; ++i) {
        cdouble v = l_.at(i, j);
        for (int k = 0; k < j; ++k)
          v -= l_.at(i, k) * std::conj(l_.at(j, k));
        l_.at(i, j) = v / ljj;
      }
      for (int k = j + 1; k < n; ++k) l_.at(j, k) = 0.0;
    }
  }

  // Solve G x = b via forward/back substitution.
  std::vector<cdouble> solve(const std::vector<cdouble>& b) const {
    const int n = l_.rows;
    if (static_cast<int>(b.size()) != n)
      throw InvalidParameter("cholesky solve: dimension mismatch");
    std::vector<cdouble> y(n);
    for (int i = 0; i < n; ++i) {
      cdouble v = b[i];
      for (int k = 0; k < i; ++k) v -= l_.at(i, k) * y[k];
      y[i] = v / l_.at(i, i).real();
    }
    std::vector<cdouble> x(n);
    for (int i = n - 1; i >= 0; --i) {
      cdouble v = y[i];
      for (int k = i + 1; k < n; ++k) v -= std::conj(l_.at(k, i)) * x[k];
      x[i] = v / l_.at(i, i).real();
    }
    return x;
  }

  const CMat& factor() const { return l_; }

 private:
  CMat l_;
};

// Smallest eigenvalue of a Hermitian positive definite matrix by inverse
// power iteration on an existing Cholesky factorization.
inline double min_eigenvalue_hpd(const CholeskyHerm& chol, int n, int iters = 64) {
  std::vector<cdouble> v(n, cdouble(1.0, 0.0));
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::vector<cdouble> w = chol.solve(v);
    const double nw = std::sqrt(norm_sq(w));
    if (nw == 0.0) break;
    for (cdouble& x : w) x /= nw;
    // Rayleigh quotient of G^{-1} is 1/lambda_min asymptotically.
    std::vector<cdouble> gw = chol.solve(w);
    double num = 0.0;
    for (int i = 0; i < n; ++i)
      num += (std::conj(w[i]) * gw[i]).real();
    lambda = num > 0.0 ? 1.0 / num : 0.0;
    v = std::move(w);
  }
  return lambda;
}

}  // namespace xlm
