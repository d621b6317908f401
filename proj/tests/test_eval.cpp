// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "xlmimo/channel.hpp"
#include "xlmimo/eval.hpp"

using namespace xlm;

namespace {

GenConfig tiny_gen(std::uint64_t seed = 19) {
  GenConfig cfg;
  cfg.master_seed = seed;
  cfg.count = 12;
  cfg.carrier.fc = 28e9;
  cfg.carrier.bw = 100e6;
  cfg.carrier.n_sc = 8;
  cfg.kind = ArrayKind::ca(8);
  cfg.n_slots = 2;
  cfg.n_rf = 4;
  cfg.scene.l_min = 1;
  cfg.scene.l_max = 2;
  cfg.scene.rays_per_cluster = 2;
  cfg.scene.nlos_scale = 0.01;
  cfg.snr_min = 5.0;
  cfg.snr_max = 15.0;
  return cfg;
}

NetHyper tiny_hyper() {
  NetHyper h;
  h.stages = 2;
  h.base_channels = 2;
  h.d_state = 2;
  h.dt_rank = 1;
  h.k_conv = 2;
  return h;
}

// Test-local dense solve (Gaussian elimination, partial pivoting) used as
// an independent oracle for the least-squares baseline.
std::vector<cdouble> solve_dense(CMat a, std::vector<cdouble> b) {
  const int n = a.rows;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a.at(r, c)) > std::abs(a.at(piv, c))) piv = r;
    if (piv != c) {
      for (int t = 0; t < n; ++t) std::swap(a.at(c, t), a.at(piv, t));
      std::swap(b[c], b[piv]);
    }
    for (int r = c + 1; r < n; ++r) {
      const cdouble f = a.at(r, c) / a.at(c, c);
      for (int t = c; t < n; ++t) a.at(r, t) -= f * a.at(c, t);
      b[r] -= f * b[c];
    }
  }
  std::vector<cdouble> x(static_cast<std::size_t>(n));
  for (int r = n - 1; r >= 0; --r) {
    cdouble acc = b[r];
    for (int t = r + 1; t < n; ++t) acc -= a.at(r, t) * x[t];
    x[r] = acc / a.at(r, r);
  }
  return x;
}

CMat random_channel(Rng& rng, int k, int n) {
  CMat h(k, n);
  for (auto& e : h.a) e = rng.cnormal();
  return h;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("position error is the Euclidean distance") {
  CHECK(position_error(0.0, 0.0, 3.0, 4.0) == doctest::Approx(5.0));
  CHECK(position_error(1.0, 2.0, 1.0, 2.0) == 0.0);
}

TEST_CASE("nmse identities") {
  Rng rng(4);
  const CMat h = random_channel(rng, 3, 5);
  CMat zero(3, 5);
  CMat twice(3, 5);
  for (std::size_t i = 0; i < h.size(); ++i) twice.a[i] = 2.0 * h.a[i];

  CHECK(nmse_ratio(h, h) == 0.0);
  CHECK(nmse_ratio(zero, h) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nmse_ratio(twice, h) == doctest::Approx(1.0).epsilon(1e-12));

  // The ratio is invariant under a common rescale of estimate and truth.
  CMat sh(3, 5), st(3, 5);
  for (std::size_t i = 0; i < h.size(); ++i) {
    sh.a[i] = 7.5 * twice.a[i];
    st.a[i] = 7.5 * h.a[i];
  }
  CHECK(nmse_ratio(sh, st) ==
        doctest::Approx(nmse_ratio(twice, h)).epsilon(1e-12));

  CHECK_THROWS_AS(nmse_ratio(h, zero), EvalError);
  CHECK_THROWS_AS(nmse_ratio(CMat(2, 5), h), EvalError);
  CHECK_THROWS_AS(nmse_ratio(CMat(0, 0), CMat(0, 0)), EvalError);
}

TEST_CASE("least squares matches an independent normal-equations solve") {
  Rng rng(99);
  const auto cs = draw_combiner(rng, 2, 3, 12);  // M = 6, N = 12
  const int k = 3;
  const CMat h = random_channel(rng, k, 12);
  const CMat y = compress(cs, h);

  const LsEstimator est(cs);
  const CMat h_hat = est.estimate(y);
  REQUIRE(h_hat.rows == k);
  REQUIRE(h_hat.cols == 12);

  // Oracle: h = W^H (W W^H)^{-1} y via dense elimination.
  const int m = cs.rows();
  CMat gram(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) {
      cdouble acc = 0.0;
      for (int t = 0; t < cs.n_ant; ++t)
        acc += cs.stacked.at(r, t) * std::conj(cs.stacked.at(c, t));
      gram.at(r, c) = acc;
    }
  for (int kk = 0; kk < k; ++kk) {
    std::vector<cdouble> b(static_cast<std::size_t>(m));
    for (int t = 0; t < m; ++t) b[static_cast<std::size_t>(t)] = y.at(kk, t);
    const auto z = solve_dense(gram, b);
    for (int t = 0; t < 12; ++t) {
      cdouble acc = 0.0;
      for (int r = 0; r < m; ++r) acc += std::conj(cs.stacked.at(r, t)) * z[r];
      CHECK(std::abs(h_hat.at(kk, t) - acc) < 1e-9);
    }
  }

  // The minimum-norm solution reproduces the noiseless measurements.
  const CMat back = compress(cs, h_hat);
  for (std::size_t i = 0; i < back.size(); ++i)
    CHECK(std::abs(back.a[i] - y.a[i]) < 1e-9);

  CHECK_THROWS_AS(est.estimate(CMat(k, 5)), InvalidParameter);
}

TEST_CASE("grid spec validation") {
  GridSpec g;
  g.n_r = 0;
  CHECK_THROWS_AS(g.validate(), InvalidParameter);
  g = GridSpec{};
  g.r_min = 0.0;
  CHECK_THROWS_AS(g.validate(), InvalidParameter);
  g = GridSpec{};
  g.r_max = 0.05;
  CHECK_THROWS_AS(g.validate(), InvalidParameter);
  g = GridSpec{};
  g.theta_max = g.theta_min - 1.0;
  CHECK_THROWS_AS(g.validate(), InvalidParameter);
}

TEST_CASE("grid axes are log-radius and linear-angle") {
  Rng rng(5);
  const auto layout = build_ca(8, 0.005);
  CarrierConfig carrier;
  carrier.n_sc = 2;
  const auto cs = draw_combiner(rng, 2, 2, 8);
  GridSpec spec;
  spec.n_r = 5;
  spec.n_theta = 4;
  spec.r_min = 0.5;
  spec.r_max = 8.0;
  spec.theta_min = -1.2;
  spec.theta_max = -0.2;
  const GridLocalizer loc(cs, layout, carrier, spec);
  CHECK(loc.radius_at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(loc.radius_at(4) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(loc.radius_at(2) == doctest::Approx(2.0).epsilon(1e-12));  // geometric mid
  CHECK(loc.theta_at(0) == doctest::Approx(-1.2).epsilon(1e-12));
  CHECK(loc.theta_at(3) == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK_THROWS_AS(loc.radius_at(5), InvalidParameter);
  CHECK_THROWS_AS(loc.theta_at(-1), InvalidParameter);
}

TEST_CASE("matched filter recovers an on-grid user exactly") {
  Rng rng(31);
  const auto layout = build_ca(16, 0.005);
  CarrierConfig carrier;
  carrier.fc = 28e9;
  carrier.bw = 100e6;
  carrier.n_sc = 4;
  const auto cs = draw_combiner(rng, 4, 2, 16);  // M = 8
  GridSpec spec;
  spec.n_r = 6;
  spec.n_theta = 7;
  spec.r_min = 0.5;
  spec.r_max = 5.0;
  spec.theta_min = -80.0 * kPi / 180.0;
  spec.theta_max = -10.0 * kPi / 180.0;
  const GridLocalizer loc(cs, layout, carrier, spec);

  const double r_true = loc.radius_at(3);
  const double th_true = loc.theta_at(2);
  const CMat h = los_channel(layout, carrier, Polar{r_true, th_true});
  const CMat y = compress(cs, h);
  const Polar p = loc.localize(y);
  CHECK(p.r == r_true);
  CHECK(p.theta == th_true);

  // All-zero observation scores every point equally; the first grid point
  // (smallest radius, then smallest angle) must win the tie.
  const Polar tie = loc.localize(CMat(4, 8));
  CHECK(tie.r == loc.radius_at(0));
  CHECK(tie.theta == loc.theta_at(0));

  CHECK_THROWS_AS(loc.localize(CMat(4, 7)), InvalidParameter);
}

TEST_CASE("sweep over classical baselines only") {
  const auto ds = generate_dataset(tiny_gen());
  const std::vector<std::uint32_t> test_idx = {8, 9, 10, 11};
  SweepConfig sc;
  sc.snr_db = {0.0, 10.0};
  sc.methods = {"ls", "grid", "oracle"};
  sc.grid.n_r = 6;
  sc.grid.n_theta = 8;

  const auto rows = run_sweep(ds, test_idx, SweepModels{}, sc);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) CHECK(r.n == 4);
  CHECK(rows[0].method == "ls");
  CHECK(rows[0].snr_db == 0.0);
  CHECK(rows[1].snr_db == 10.0);
  for (int i : {0, 1}) {
    CHECK(!std::isfinite(rows[i].mpe_m));
    CHECK(std::isfinite(rows[i].nmse));
    CHECK(rows[i].nmse > 0.0);
  }
  for (int i : {2, 3}) {
    CHECK(rows[i].method == "grid");
    CHECK(std::isfinite(rows[i].mpe_m));
    CHECK(rows[i].mpe_m >= 0.0);
    CHECK(!std::isfinite(rows[i].nmse));
  }
  for (int i : {4, 5}) {
    CHECK(rows[i].method == "oracle");
    CHECK(rows[i].mpe_m == 0.0);
    CHECK(rows[i].nmse == 0.0);
  }

  // Bitwise reproducible: noise comes from per-sample sub-streams.
  const auto again = run_sweep(ds, test_idx, SweepModels{}, sc);
  CHECK(sweep_csv(rows) == sweep_csv(again));
}

TEST_CASE("sweep with the learned methods") {
  const auto ds = generate_dataset(tiny_gen());
  std::vector<std::uint32_t> train_idx;
  for (std::uint32_t i = 0; i < 8; ++i) train_idx.push_back(i);
  TrainConfig tc;
  tc.batch = 4;
  tc.steps = 2;
  tc.seed = 13;
  const auto s1 = train_stage1(ds, train_idx, tiny_hyper(), tc);
  const auto s2 = train_stage2(ds, train_idx, s1.model, s1.scales,
                               tiny_hyper(), tc);

  SweepModels models;
  models.stage1 = &s1.model;
  models.stage2 = &s2.model;
  models.scales = s1.scales;

  SweepConfig sc;
  sc.snr_db = {10.0};
  sc.methods = {"cpmamba", "cpmamba-oracle"};
  const auto rows = run_sweep(ds, {8, 9, 10}, models, sc);
  REQUIRE(rows.size() == 2);
  CHECK(std::isfinite(rows[0].mpe_m));
  CHECK(std::isfinite(rows[0].nmse));
  CHECK(rows[0].nmse > 0.0);
  CHECK(rows[1].mpe_m == 0.0);  // oracle positions
  CHECK(std::isfinite(rows[1].nmse));

  SweepConfig bad = sc;
  bad.methods = {"unknown"};
  CHECK_THROWS_AS(run_sweep(ds, {8}, models, bad), EvalError);
  CHECK_THROWS_AS(run_sweep(ds, {8}, SweepModels{}, sc), EvalError);
  CHECK_THROWS_AS(run_sweep(ds, {}, models, sc), EvalError);
  SweepConfig empty = sc;
  empty.snr_db = {};
  CHECK_THROWS_AS(run_sweep(ds, {8}, models, empty), EvalError);
  empty = sc;
  empty.methods = {};
  CHECK_THROWS_AS(run_sweep(ds, {8}, models, empty), EvalError);
}

TEST_CASE("csv formatting handles absent metrics") {
  std::vector<SweepRow> rows(2);
  rows[0].method = "ls";
  rows[0].snr_db = 10.0;
  rows[0].mpe_m = std::nan("");
  rows[0].nmse = 0.5;
  rows[0].n = 2;
  rows[1].method = "grid";
  rows[1].snr_db = -5.0;
  rows[1].mpe_m = 0.125;
  rows[1].nmse = std::nan("");
  rows[1].n = 2;
  CHECK(sweep_csv(rows) ==
        "method,snr_db,mpe_m,nmse,nmse_db,n\n"
        "ls,10,nan,0.5,-3.01029996,2\n"
        "grid,-5,0.125,nan,nan,2\n");
}

}  // TEST_SUITE
