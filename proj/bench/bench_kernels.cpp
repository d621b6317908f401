// SPDX-License-Identifier: Apache-2.0
//
// Timing comparison between the OpenMP kernels and their serial reference
// variants, over shapes representative of the training workload.  Prints a
// table of per-call wall time and effective GFLOP/s.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "xlmimo/kernels.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_call(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

template <class T>
std::vector<T> randu(std::size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(dist(gen));
  return v;
}

void report(const std::string& name, double flops, double t_omp,
            double t_ref) {
  std::printf("%-28s %10.3f ms %8.2f GF/s | ref %10.3f ms %8.2f GF/s\n",
              name.c_str(), t_omp * 1e3, flops / t_omp * 1e-9, t_ref * 1e3,
              flops / t_ref * 1e-9);
}

template <class T>
void bench_matmul(const char* tag, int m, int k, int n, int reps) {
  const auto a = randu<T>(static_cast<std::size_t>(m) * k, 1);
  const auto b = randu<T>(static_cast<std::size_t>(k) * n, 2);
  std::vector<T> c(static_cast<std::size_t>(m) * n);
  const double flops = 2.0 * m * k * n;
  const double t_omp = time_call(
      [&] { xlm::kern::matmul(a.data(), b.data(), c.data(), m, k, n); },
      reps);
  const double t_ref = time_call(
      [&] { xlm::kern::ref::matmul(a.data(), b.data(), c.data(), m, k, n); },
      reps);
  char name[64];
  std::snprintf(name, sizeof name, "matmul<%s> %dx%dx%d", tag, m, k, n);
  report(name, flops, t_omp, t_ref);
}

template <class T>
void bench_conv(const char* tag, int ci, int co, int h, int w, int stride,
                int reps) {
  const int kh = 3, kw = 3, pad = 1;
  const int ho = xlm::kern::conv_out_dim(h, kh, stride, pad);
  const int wo = xlm::kern::conv_out_dim(w, kw, stride, pad);
  const auto in = randu<T>(static_cast<std::size_t>(ci) * h * w, 3);
  const auto wt = randu<T>(static_cast<std::size_t>(co) * ci * kh * kw, 4);
  const auto bias = randu<T>(static_cast<std::size_t>(co), 5);
  std::vector<T> out(static_cast<std::size_t>(co) * ho * wo);
  const double flops = 2.0 * co * ho * wo * ci * kh * kw;
  const double t_omp = time_call(
      [&] {
        xlm::kern::conv2d_fwd(in.data(), wt.data(), bias.data(), out.data(),
                              ci, h, w, co, kh, kw, stride, pad);
      },
      reps);
  const double t_ref = time_call(
      [&] {
        xlm::kern::ref::conv2d_fwd(in.data(), wt.data(), bias.data(),
                                   out.data(), ci, h, w, co, kh, kw, stride,
                                   pad);
      },
      reps);
  char name[64];
  std::snprintf(name, sizeof name, "conv2d<%s> %d->%d %dx%d/s%d", tag, ci,
                co, h, w, stride);
  report(name, flops, t_omp, t_ref);
}

template <class T>
void bench_scan(const char* tag, int l, int d, int s, int reps) {
  const auto x = randu<T>(static_cast<std::size_t>(l) * d, 6);
  auto abar = randu<T>(static_cast<std::size_t>(l) * d * s, 7);
  for (auto& v : abar) v = static_cast<T>(0.5) + static_cast<T>(0.4) * v;
  const auto bbar = randu<T>(static_cast<std::size_t>(l) * d * s, 8);
  const auto ct = randu<T>(static_cast<std::size_t>(l) * s, 9);
  std::vector<T> y(static_cast<std::size_t>(l) * d);
  std::vector<T> st(static_cast<std::size_t>(l) * d * s);
  const double flops = 6.0 * l * d * s;
  const double t_omp = time_call(
      [&] {
        xlm::kern::scan_fwd(x.data(), abar.data(), bbar.data(), ct.data(),
                            y.data(), st.data(), l, d, s);
      },
      reps);
  const double t_ref = time_call(
      [&] {
        xlm::kern::ref::scan_fwd(x.data(), abar.data(), bbar.data(),
                                 ct.data(), y.data(), st.data(), l, d, s);
      },
      reps);
  char name[64];
  std::snprintf(name, sizeof name, "scan<%s> L%d D%d S%d", tag, l, d, s);
  report(name, flops, t_omp, t_ref);
}

template <class T>
void bench_dwconv(const char* tag, int d, int l, int reps) {
  const int taps = 4;
  const auto in = randu<T>(static_cast<std::size_t>(d) * l, 10);
  const auto w = randu<T>(static_cast<std::size_t>(d) * taps, 11);
  const auto bias = randu<T>(static_cast<std::size_t>(d), 12);
  std::vector<T> out(static_cast<std::size_t>(d) * l);
  const double flops = 2.0 * d * l * taps;
  const double t_omp = time_call(
      [&] {
        xlm::kern::dwconv1d_fwd(in.data(), w.data(), bias.data(), out.data(),
                                d, l, taps);
      },
      reps);
  const double t_ref = time_call(
      [&] {
        xlm::kern::ref::dwconv1d_fwd(in.data(), w.data(), bias.data(),
                                     out.data(), d, l, taps);
      },
      reps);
  char name[64];
  std::snprintf(name, sizeof name, "dwconv1d<%s> D%d L%d", tag, d, l);
  report(name, flops, t_omp, t_ref);
}

}  // namespace

int main() {
  std::printf("kernel                          omp time    omp rate |"
              "     ref time    ref rate\n");
  bench_matmul<float>("f32", 256, 256, 256, 20);
  bench_matmul<double>("f64", 256, 256, 256, 20);
  bench_matmul<float>("f32", 1024, 16, 64, 50);
  bench_conv<float>("f32", 16, 16, 32, 32, 1, 50);
  bench_conv<double>("f64", 16, 16, 32, 32, 1, 50);
  bench_conv<float>("f32", 48, 16, 32, 64, 1, 20);
  bench_conv<float>("f32", 16, 32, 32, 64, 2, 50);
  bench_dwconv<float>("f32", 64, 1024, 200);
  bench_scan<float>("f32", 1024, 32, 16, 50);
  bench_scan<double>("f64", 1024, 32, 16, 50);
  return 0;
}
