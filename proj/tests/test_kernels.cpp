// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "xlmimo/kernels.hpp"
#include "xlmimo/rng.hpp"

using namespace xlm;

namespace {

template <class T>
std::vector<T> random_vec(Rng& rng, std::size_t n, double lo = -1.0,
                          double hi = 1.0) {
  std::vector<T> v(n);
  for (T& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE_TEMPLATE("parallel matmul is bitwise equal to the reference", T,
                   float, double) {
  Rng rng(31u);
  for (int trial = 0; trial < 8; ++trial) {
    const int m = static_cast<int>(rng.uniform_int(1, 40));
    const int k = static_cast<int>(rng.uniform_int(1, 40));
    const int n = static_cast<int>(rng.uniform_int(1, 40));
    const auto a = random_vec<T>(rng, static_cast<std::size_t>(m) * k);
    const auto b = random_vec<T>(rng, static_cast<std::size_t>(k) * n);
    std::vector<T> c_omp(static_cast<std::size_t>(m) * n);
    std::vector<T> c_ref(c_omp.size());
    kern::matmul(a.data(), b.data(), c_omp.data(), m, k, n);
    kern::ref::matmul(a.data(), b.data(), c_ref.data(), m, k, n);
    for (std::size_t i = 0; i < c_omp.size(); ++i)
      CHECK(c_omp[i] == c_ref[i]);
  }
}

TEST_CASE("matmul accumulate adds on top of the output") {
  const double a[4] = {1, 2, 3, 4};  // 2x2
  const double b[4] = {5, 6, 7, 8};
  double c[4] = {100, 100, 100, 100};
  kern::matmul(a, b, c, 2, 2, 2, /*accumulate=*/true);
  CHECK(c[0] == 100 + 19);
  CHECK(c[1] == 100 + 22);
  CHECK(c[2] == 100 + 43);
  CHECK(c[3] == 100 + 50);
}

TEST_CASE("transposed matmuls agree with explicit transposition") {
  Rng rng(32u);
  const int m = 7, k = 5, n = 6;
  const auto a = random_vec<double>(rng, m * k);
  const auto b = random_vec<double>(rng, k * n);
  // Materialize b^T (n x k) and a^T (k x m).
  std::vector<double> bt(n * k), at(k * m);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];

  std::vector<double> c_plain(m * n), c_nt(m * n), c_tn(m * n);
  kern::ref::matmul(a.data(), b.data(), c_plain.data(), m, k, n);
  kern::matmul_nt(a.data(), bt.data(), c_nt.data(), m, k, n);
  kern::matmul_tn(at.data(), b.data(), c_tn.data(), m, k, n);
  // Different loop forms may contract multiply-adds differently, so this
  // cross-form comparison gets a tolerance (unlike the same-form
  // omp-vs-reference checks, which must agree bitwise).
  for (int i = 0; i < m * n; ++i) {
    CHECK(c_nt[i] == doctest::Approx(c_plain[i]).epsilon(1e-13));
    CHECK(c_tn[i] == doctest::Approx(c_plain[i]).epsilon(1e-13));
  }
}

TEST_CASE_TEMPLATE("im2col conv2d matches the direct reference", T, float,
                   double) {
  // The primary conv2d routes through im2col + matmul; rounding may differ
  // from the direct loop nest at the last ulp, hence a tight tolerance.
  const double eps = std::is_same_v<T, float> ? 1e-5 : 1e-13;
  Rng rng(33u);
  for (int stride : {1, 2}) {
    for (int ksz : {1, 3}) {
      const int c_in = 3, h = 8, w = 10, c_out = 4;
      const int pad = ksz == 3 ? 1 : 0;
      const auto in = random_vec<T>(rng, static_cast<std::size_t>(c_in) * h * w);
      const auto wt = random_vec<T>(
          rng, static_cast<std::size_t>(c_out) * c_in * ksz * ksz);
      const auto bias = random_vec<T>(rng, c_out);
      const int ho = kern::conv_out_dim(h, ksz, stride, pad);
      const int wo = kern::conv_out_dim(w, ksz, stride, pad);
      std::vector<T> out_omp(static_cast<std::size_t>(c_out) * ho * wo);
      std::vector<T> out_ref(out_omp.size());
      kern::conv2d_fwd(in.data(), wt.data(), bias.data(), out_omp.data(),
                       c_in, h, w, c_out, ksz, ksz, stride, pad);
      kern::ref::conv2d_fwd(in.data(), wt.data(), bias.data(), out_ref.data(),
                            c_in, h, w, c_out, ksz, ksz, stride, pad);
      for (std::size_t i = 0; i < out_omp.size(); ++i)
        CHECK(static_cast<double>(out_omp[i]) ==
              doctest::Approx(static_cast<double>(out_ref[i])).epsilon(eps));
    }
  }
}

TEST_CASE("conv2d shapes: same padding at stride 1, halving at stride 2") {
  CHECK(kern::conv_out_dim(32, 3, 1, 1) == 32);
  CHECK(kern::conv_out_dim(32, 3, 2, 1) == 16);
  CHECK(kern::conv_out_dim(8, 1, 1, 0) == 8);
}

TEST_CASE("conv2d matches a hand-worked example") {
  // 1 channel, 3x3 input, identity-ish 3x3 kernel with a single 1 at the
  // center: same-padded output equals input plus bias.
  const double in[9] = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  double w[9] = {0, 0, 0, 0, 1, 0, 0, 0, 0};
  const double bias[1] = {0.5};
  double out[9];
  kern::conv2d_fwd(in, w, bias, out, 1, 3, 3, 1, 3, 3, 1, 1);
  for (int i = 0; i < 9; ++i) CHECK(out[i] == in[i] + 0.5);
  // Shifted kernel: top-left tap reads the up-left neighbor (zero pad).
  double w2[9] = {1, 0, 0, 0, 0, 0, 0, 0, 0};
  kern::conv2d_fwd(in, w2, static_cast<const double*>(nullptr), out, 1, 3, 3,
                   1, 3, 3, 1, 1);
  CHECK(out[0] == 0.0);   // up-left of (0,0) is padding
  CHECK(out[4] == 1.0);   // up-left of center is in[0]
  CHECK(out[8] == 5.0);   // up-left of (2,2) is in[4]
}

TEST_CASE("conv2d backward kernels match central differences") {
  Rng rng(34u);
  const int c_in = 2, h = 5, w = 4, c_out = 3, ksz = 3, pad = 1;
  for (int stride : {1, 2}) {
    const int ho = kern::conv_out_dim(h, ksz, stride, pad);
    const int wo = kern::conv_out_dim(w, ksz, stride, pad);
    auto in = random_vec<double>(rng, static_cast<std::size_t>(c_in) * h * w);
    auto wt = random_vec<double>(
        rng, static_cast<std::size_t>(c_out) * c_in * ksz * ksz);
    auto bias = random_vec<double>(rng, c_out);
    const auto dout =
        random_vec<double>(rng, static_cast<std::size_t>(c_out) * ho * wo);

    // Scalar objective sum(out * dout) so d obj / d input = bwd kernels.
    const auto objective = [&]() {
      std::vector<double> out(static_cast<std::size_t>(c_out) * ho * wo);
      kern::conv2d_fwd(in.data(), wt.data(), bias.data(), out.data(), c_in,
                       h, w, c_out, ksz, ksz, stride, pad);
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * dout[i];
      return s;
    };
    const auto check_grad = [&](std::vector<double>& target,
                                const std::vector<double>& analytic) {
      const double eps = 1e-6;
      for (std::size_t i = 0; i < target.size(); ++i) {
        const double keep = target[i];
        target[i] = keep + eps;
        const double up = objective();
        target[i] = keep - eps;
        const double dn = objective();
        target[i] = keep;
        const double fd = (up - dn) / (2 * eps);
        CHECK(std::abs(fd - analytic[i]) <=
              1e-4 * std::max(1.0, std::abs(fd)));
      }
    };

    std::vector<double> din(in.size()), dw(wt.size()), db(bias.size());
    kern::conv2d_bwd_input(dout.data(), wt.data(), din.data(), c_in, h, w,
                           c_out, ksz, ksz, stride, pad);
    kern::conv2d_bwd_weight(dout.data(), in.data(), dw.data(), c_in, h, w,
                            c_out, ksz, ksz, stride, pad);
    kern::conv2d_bwd_bias(dout.data(), db.data(), c_out, ho, wo);
    check_grad(in, din);
    check_grad(wt, dw);
    check_grad(bias, db);
  }
}

TEST_CASE_TEMPLATE("depthwise conv matches reference and is causal", T,
                   float, double) {
  Rng rng(35u);
  const int d = 6, l = 20, taps = 4;
  const auto in = random_vec<T>(rng, static_cast<std::size_t>(d) * l);
  const auto w = random_vec<T>(rng, static_cast<std::size_t>(d) * taps);
  const auto bias = random_vec<T>(rng, d);
  std::vector<T> out_omp(static_cast<std::size_t>(d) * l), out_ref(out_omp.size());
  kern::dwconv1d_fwd(in.data(), w.data(), bias.data(), out_omp.data(), d, l,
                     taps);
  kern::ref::dwconv1d_fwd(in.data(), w.data(), bias.data(), out_ref.data(),
                          d, l, taps);
  for (std::size_t i = 0; i < out_omp.size(); ++i)
    CHECK(out_omp[i] == out_ref[i]);

  // Causality: changing the tail of the input must not move earlier
  // outputs.
  const int cut = 11;
  std::vector<T> in2 = in;
  for (int ch = 0; ch < d; ++ch)
    for (int t = cut; t < l; ++t)
      in2[static_cast<std::size_t>(ch) * l + t] += T(1);
  std::vector<T> out2(out_omp.size());
  kern::dwconv1d_fwd(in2.data(), w.data(), bias.data(), out2.data(), d, l,
                     taps);
  for (int ch = 0; ch < d; ++ch)
    for (int t = 0; t < cut; ++t)
      CHECK(out2[static_cast<std::size_t>(ch) * l + t] ==
            out_omp[static_cast<std::size_t>(ch) * l + t]);
}

TEST_CASE("depthwise conv matches a hand-worked example") {
  // One channel, taps [w0, w1] => out[t] = w1*x[t] + w0*x[t-1].
  const double x[4] = {1, 2, 3, 4};
  const double w[2] = {10, 1};
  double out[4];
  kern::dwconv1d_fwd(x, w, static_cast<const double*>(nullptr), out, 1, 4, 2);
  CHECK(out[0] == 1.0);          // left pad
  CHECK(out[1] == 2.0 + 10.0);
  CHECK(out[2] == 3.0 + 20.0);
  CHECK(out[3] == 4.0 + 30.0);
}

TEST_CASE_TEMPLATE("parallel scan is bitwise equal to the reference", T,
                   float, double) {
  Rng rng(36u);
  for (int trial = 0; trial < 5; ++trial) {
    const int l = static_cast<int>(rng.uniform_int(1, 33));
    const int d = static_cast<int>(rng.uniform_int(1, 12));
    const int s = static_cast<int>(rng.uniform_int(1, 8));
    const auto x = random_vec<T>(rng, static_cast<std::size_t>(l) * d);
    const auto abar =
        random_vec<T>(rng, static_cast<std::size_t>(l) * d * s, 0.0, 1.0);
    const auto bbar = random_vec<T>(rng, static_cast<std::size_t>(l) * d * s);
    const auto ct = random_vec<T>(rng, static_cast<std::size_t>(l) * s);
    std::vector<T> y1(static_cast<std::size_t>(l) * d), y2(y1.size());
    std::vector<T> st1(static_cast<std::size_t>(l) * d * s), st2(st1.size());
    kern::scan_fwd(x.data(), abar.data(), bbar.data(), ct.data(), y1.data(),
                   st1.data(), l, d, s);
    kern::ref::scan_fwd(x.data(), abar.data(), bbar.data(), ct.data(),
                        y2.data(), st2.data(), l, d, s);
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
    for (std::size_t i = 0; i < st1.size(); ++i) CHECK(st1[i] == st2[i]);
  }
}

TEST_CASE("scan follows the recurrence written out longhand") {
  // L=3, D=1, S=2 worked by hand.
  const double x[3] = {1.0, -2.0, 0.5};
  const double abar[6] = {0.5, 0.25, 0.5, 0.25, 0.5, 0.25};
  const double bbar[6] = {1.0, 2.0, 1.0, 2.0, 1.0, 2.0};
  const double ct[6] = {1.0, 1.0, 1.0, 0.0, 0.0, 1.0};
  double y[3], st[6];
  kern::scan_fwd(x, abar, bbar, ct, y, st, 3, 1, 2);
  // t=0: s = (1*1, 2*1) = (1, 2);        y = 1 + 2 = 3
  // t=1: s = (0.5*1-2, 0.5*2-4) = (-1.5, -3.5); y = c=(1,0) -> -1.5
  // t=2: s = (-0.75+0.5, -0.875+1) = (-0.25, 0.125); y = c=(0,1) -> 0.125
  CHECK(y[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(-1.5).epsilon(1e-15));
  CHECK(y[2] == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(st[0] == doctest::Approx(1.0));
  CHECK(st[1] == doctest::Approx(2.0));
  CHECK(st[2] == doctest::Approx(-1.5));
  CHECK(st[3] == doctest::Approx(-3.5));
}

TEST_CASE("scan is causal") {
  Rng rng(37u);
  const int l = 16, d = 3, s = 4;
  auto x = random_vec<double>(rng, static_cast<std::size_t>(l) * d);
  const auto abar =
      random_vec<double>(rng, static_cast<std::size_t>(l) * d * s, 0.0, 1.0);
  const auto bbar = random_vec<double>(rng, static_cast<std::size_t>(l) * d * s);
  const auto ct = random_vec<double>(rng, static_cast<std::size_t>(l) * s);
  std::vector<double> y1(static_cast<std::size_t>(l) * d), st(static_cast<std::size_t>(l) * d * s);
  kern::scan_fwd(x.data(), abar.data(), bbar.data(), ct.data(), y1.data(),
                 st.data(), l, d, s);
  const int cut = 9;
  for (int t = cut; t < l; ++t)
    for (int ch = 0; ch < d; ++ch) x[static_cast<std::size_t>(t) * d + ch] = 7.0;
  std::vector<double> y2(y1.size());
  kern::scan_fwd(x.data(), abar.data(), bbar.data(), ct.data(), y2.data(),
                 st.data(), l, d, s);
  for (int t = 0; t < cut; ++t)
    for (int ch = 0; ch < d; ++ch)
      CHECK(y1[static_cast<std::size_t>(t) * d + ch] ==
            y2[static_cast<std::size_t>(t) * d + ch]);
}

TEST_CASE("scan backward matches central differences") {
  Rng rng(38u);
  const int l = 6, d = 3, s = 2;
  auto x = random_vec<double>(rng, static_cast<std::size_t>(l) * d);
  auto abar = random_vec<double>(rng, static_cast<std::size_t>(l) * d * s, 0.1, 0.9);
  auto bbar = random_vec<double>(rng, static_cast<std::size_t>(l) * d * s);
  auto ct = random_vec<double>(rng, static_cast<std::size_t>(l) * s);
  const auto dy = random_vec<double>(rng, static_cast<std::size_t>(l) * d);

  const auto objective = [&]() {
    std::vector<double> y(static_cast<std::size_t>(l) * d);
    std::vector<double> st(static_cast<std::size_t>(l) * d * s);
    kern::scan_fwd(x.data(), abar.data(), bbar.data(), ct.data(), y.data(),
                   st.data(), l, d, s);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * dy[i];
    return acc;
  };

  std::vector<double> y(static_cast<std::size_t>(l) * d), st(static_cast<std::size_t>(l) * d * s);
  kern::scan_fwd(x.data(), abar.data(), bbar.data(), ct.data(), y.data(),
                 st.data(), l, d, s);
  std::vector<double> dx(x.size()), dabar(abar.size()), dbbar(bbar.size()),
      dct(ct.size());
  kern::scan_bwd(dy.data(), x.data(), abar.data(), bbar.data(), ct.data(),
                 st.data(), dx.data(), dabar.data(), dbbar.data(),
                 dct.data(), l, d, s);

  const auto check_grad = [&](std::vector<double>& target,
                              const std::vector<double>& analytic) {
    const double eps = 1e-6;
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double keep = target[i];
      target[i] = keep + eps;
      const double up = objective();
      target[i] = keep - eps;
      const double dn = objective();
      target[i] = keep;
      const double fd = (up - dn) / (2 * eps);
      CHECK(std::abs(fd - analytic[i]) <=
            1e-4 * std::max(1.0, std::abs(fd)));
    }
  };
  check_grad(x, dx);
  check_grad(abar, dabar);
  check_grad(bbar, dbbar);
  check_grad(ct, dct);
}

}  // TEST_SUITE
