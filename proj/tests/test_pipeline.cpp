// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "xlmimo/dataset.hpp"
#include "xlmimo/pipeline.hpp"

using namespace xlm;

namespace {

GenConfig tiny_gen(std::uint64_t seed = 7) {
  GenConfig cfg;
  cfg.master_seed = seed;
  cfg.count = 16;
  cfg.carrier.fc = 28e9;
  cfg.carrier.bw = 100e6;
  cfg.carrier.n_sc = 8;
  cfg.kind = ArrayKind::ca(8);
  cfg.n_slots = 2;  // M = P * N_RF = 8 measurements per subcarrier
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

std::vector<std::uint32_t> first_n(std::uint32_t n) {
  std::vector<std::uint32_t> idx(n);
  for (std::uint32_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("scale computation matches a hand-built dataset") {
  Dataset ds;
  ds.cfg = tiny_gen();
  ds.cfg.ue.r_max = 12.5;
  SampleRecord a, b;
  a.y_pilot = {1.0f, 0.0f, 0.0f, 2.0f};  // |.|^2: 1, 4
  b.y_pilot = {3.0f, 4.0f, 0.0f, 0.0f};  // |.|^2: 25, 0
  a.h_los = {2.0f, 0.0f};                // |.|^2: 4
  b.h_los = {0.0f, 0.0f};                // |.|^2: 0
  ds.samples = {a, b};

  const auto sc = compute_scales(ds, {0, 1});
  CHECK(sc.y_rms == doctest::Approx(std::sqrt(30.0 / 4.0)).epsilon(1e-12));
  CHECK(sc.h_rms == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(sc.r_max == 12.5);

  // All-zero split degrades to unit scales instead of dividing by zero.
  SampleRecord z;
  z.y_pilot = {0.0f, 0.0f};
  z.h_los = {0.0f, 0.0f};
  Dataset zds;
  zds.cfg = ds.cfg;
  zds.samples = {z};
  const auto zsc = compute_scales(zds, {0});
  CHECK(zsc.y_rms == 1.0);
  CHECK(zsc.h_rms == 1.0);

  CHECK_THROWS_AS(compute_scales(ds, {}), TrainingError);
}

TEST_CASE("input images reject inconsistent shapes") {
  CHECK_THROWS_AS(pilot_image({1.0f, 2.0f}, 2, 2, 1.0), InvalidParameter);
  CHECK_THROWS_AS(pilot_image({1.0f, 2.0f}, 1, 1, 0.0), InvalidParameter);
  CMat empty;
  CHECK_THROWS_AS(prior_image(empty, 0.0, 0.0, NormScales{}), InvalidParameter);
}

TEST_CASE("pilot image holds scaled re/im planes") {
  const std::vector<float> y = {1.0f, -2.0f, 3.0f, 4.0f};
  auto img = pilot_image(y, 1, 2, 2.0);
  REQUIRE(img->shape == std::vector<int>{2, 1, 2});
  CHECK(img->val[0] == 0.5f);
  CHECK(img->val[1] == 1.5f);
  CHECK(img->val[2] == -1.0f);
  CHECK(img->val[3] == 2.0f);
}

TEST_CASE("prior image carries the normalized position planes") {
  CMat prior(1, 2);
  prior.at(0, 0) = {1.0, -1.0};
  prior.at(0, 1) = {0.5, 0.25};
  NormScales sc{1.0, 0.5, 10.0};
  auto img = prior_image(prior, 3.0, -4.0, sc);
  REQUIRE(img->shape == std::vector<int>{4, 1, 2});
  CHECK(img->val[0] == 2.0f);    // re / h_rms
  CHECK(img->val[1] == 1.0f);
  CHECK(img->val[2] == -2.0f);   // im / h_rms
  CHECK(img->val[3] == 0.5f);
  CHECK(img->val[4] == 0.3f);    // x / r_max
  CHECK(img->val[5] == 0.3f);
  CHECK(img->val[6] == -0.4f);   // y / r_max
  CHECK(img->val[7] == -0.4f);
}

TEST_CASE("polar rebuild reproduces the stored line-of-sight planes bitwise") {
  const auto cfg = tiny_gen();
  const auto ds = generate_dataset(cfg);
  for (const auto idx : {0, 5, 15}) {
    const auto& rec = ds.samples[static_cast<std::size_t>(idx)];
    const CMat prior =
        los_channel(ds.layout, ds.cfg.carrier, Polar{rec.r, rec.theta});
    REQUIRE(prior.size() * 2 == rec.h_los.size());
    for (std::size_t i = 0; i < prior.size(); ++i) {
      CHECK(static_cast<float>(prior.a[i].real()) == rec.h_los[2 * i]);
      CHECK(static_cast<float>(prior.a[i].imag()) == rec.h_los[2 * i + 1]);
    }
  }
}

TEST_CASE("prior radius is clamped at the floor") {
  const auto cfg = tiny_gen();
  const auto ds = generate_dataset(cfg);
  const CMat clamped =
      los_prior_from_xy(ds.layout, ds.cfg.carrier, 0.0, 0.0, 0.1);
  const CMat direct = los_channel(ds.layout, ds.cfg.carrier, Polar{0.1, 0.0});
  REQUIRE(clamped.size() == direct.size());
  for (std::size_t i = 0; i < clamped.size(); ++i)
    CHECK(clamped.a[i] == direct.a[i]);
  CHECK_THROWS_AS(los_prior_from_xy(ds.layout, ds.cfg.carrier, 1.0, 1.0, 0.0),
                  InvalidParameter);
}

TEST_CASE("stage-1 step-0 loss is the mean squared position norm") {
  // Zero-initialized position head predicts the origin, so the first batch
  // loss must equal the mean of ||c||^2 over the batch.  Using the whole
  // split as one batch makes the expectation independent of batch order.
  const auto ds = generate_dataset(tiny_gen());
  const auto idx = first_n(8);
  TrainConfig tc;
  tc.batch = 8;
  tc.steps = 1;
  tc.seed = 11;
  tc.report_every = 1;
  const auto art = train_stage1(ds, idx, tiny_hyper(), tc);
  REQUIRE(art.result.trace.size() >= 1);
  CHECK(art.result.trace.front().step == 0);

  double expect = 0.0;
  for (const auto i : idx) {
    const auto& rec = ds.samples[i];
    expect += rec.x * rec.x + rec.y * rec.y;
  }
  expect /= static_cast<double>(idx.size());
  CHECK(art.result.trace.front().loss ==
        doctest::Approx(expect).epsilon(1e-4));
}

TEST_CASE("stage-1 training is reproducible bit for bit") {
  const auto ds = generate_dataset(tiny_gen());
  const auto idx = first_n(8);
  TrainConfig tc;
  tc.batch = 4;
  tc.steps = 6;
  tc.seed = 3;
  tc.report_every = 2;
  const auto a = train_stage1(ds, idx, tiny_hyper(), tc);
  const auto b = train_stage1(ds, idx, tiny_hyper(), tc);
  REQUIRE(a.result.trace.size() == b.result.trace.size());
  for (std::size_t i = 0; i < a.result.trace.size(); ++i) {
    CHECK(a.result.trace[i].step == b.result.trace[i].step);
    CHECK(a.result.trace[i].loss == b.result.trace[i].loss);  // bitwise
  }
  const auto pa = ad::param_list(a.model);
  const auto pb = ad::param_list(b.model);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i]->val == pb[i]->val);
}

TEST_CASE("stage-2 step-0 loss matches a complex-arithmetic oracle") {
  // With oracle positions and a zero-initialized channel head the
  // reconstruction equals the LoS prior, so the first batch loss must be
  // the mean complex squared error || h - h_los ||^2 computed directly.
  const auto ds = generate_dataset(tiny_gen());
  const auto idx = first_n(8);
  const auto scales = compute_scales(ds, idx);
  Rng dummy(0);
  const auto s1cfg = stage1_net_config(ds, tiny_hyper());
  auto stage1 = ad::build_model<float>(s1cfg, dummy);

  TrainConfig tc;
  tc.batch = 8;
  tc.steps = 1;
  tc.seed = 21;
  tc.report_every = 1;
  tc.oracle_positions = true;
  const auto art = train_stage2(ds, idx, stage1, scales, tiny_hyper(), tc);

  double expect = 0.0;
  for (const auto i : idx) {
    const auto& rec = ds.samples[i];
    const CMat h = to_cmat(rec.h, ds.n_sc(), ds.n_ant());
    const CMat prior =
        los_channel(ds.layout, ds.cfg.carrier, Polar{rec.r, rec.theta});
    for (std::size_t t = 0; t < h.size(); ++t)
      expect += std::norm(h.a[t] - prior.a[t]);
  }
  expect /= static_cast<double>(idx.size());
  REQUIRE(art.result.trace.size() >= 1);
  CHECK(art.result.trace.front().step == 0);
  CHECK(art.result.trace.front().loss ==
        doctest::Approx(expect).epsilon(1e-4));
}

TEST_CASE("stage-2 training leaves stage 1 untouched and runs end to end") {
  const auto ds = generate_dataset(tiny_gen());
  const auto idx = first_n(8);
  TrainConfig tc1;
  tc1.batch = 4;
  tc1.steps = 3;
  tc1.seed = 5;
  const auto s1 = train_stage1(ds, idx, tiny_hyper(), tc1);

  std::vector<std::vector<float>> before;
  for (const auto& p : ad::param_list(s1.model)) before.push_back(p->val);

  TrainConfig tc2 = tc1;
  tc2.steps = 3;
  const auto s2 = train_stage2(ds, idx, s1.model, s1.scales, tiny_hyper(), tc2);
  CHECK(s2.result.steps_run == 3);
  CHECK(std::isfinite(s2.result.final_loss));

  const auto after = ad::param_list(s1.model);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(before[i] == after[i]->val);  // frozen stage 1, bitwise

  // Inference composes both stages deterministically.
  const auto& rec = ds.samples[12];
  const auto ia = infer_sample(s1.model, s2.model, s1.scales, ds.layout,
                               ds.cfg.carrier, ds.cfg.ue.r_min, rec.y_pilot,
                               ds.n_sc(), ds.n_ant());
  const auto ib = infer_sample(s1.model, s2.model, s1.scales, ds.layout,
                               ds.cfg.carrier, ds.cfg.ue.r_min, rec.y_pilot,
                               ds.n_sc(), ds.n_ant());
  CHECK(std::isfinite(ia.x_hat));
  CHECK(std::isfinite(ia.y_hat));
  REQUIRE(ia.h_hat.rows == ds.n_sc());
  REQUIRE(ia.h_hat.cols == ds.n_ant());
  CHECK(ia.x_hat == ib.x_hat);
  CHECK(ia.y_hat == ib.y_hat);
  for (std::size_t t = 0; t < ia.h_hat.size(); ++t) {
    CHECK(std::isfinite(ia.h_hat.a[t].real()));
    CHECK(ia.h_hat.a[t] == ib.h_hat.a[t]);
  }
}

TEST_CASE("early stop honors the loss target") {
  const auto ds = generate_dataset(tiny_gen());
  TrainConfig tc;
  tc.batch = 4;
  tc.steps = 50;
  tc.seed = 2;
  tc.target_loss = 1e30;  // any finite loss qualifies immediately
  const auto art = train_stage1(ds, first_n(8), tiny_hyper(), tc);
  CHECK(art.result.steps_run == 1);
  CHECK(art.result.trace.back().step == 0);
}

TEST_CASE("diverged training aborts with a diagnostic") {
  const auto ds = generate_dataset(tiny_gen());
  TrainConfig tc;
  tc.batch = 4;
  tc.steps = 10;
  tc.seed = 2;
  tc.lr = 1e25;  // Adam steps of this size overflow float activations
  CHECK_THROWS_AS(train_stage1(ds, first_n(8), tiny_hyper(), tc),
                  TrainingError);
}

TEST_CASE("splits smaller than one batch are rejected") {
  const auto ds = generate_dataset(tiny_gen());
  TrainConfig tc;
  tc.batch = 32;
  CHECK_THROWS_AS(train_stage1(ds, first_n(8), tiny_hyper(), tc),
                  TrainingError);
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.batch = 0;
  CHECK_THROWS_AS(tc.validate(), InvalidParameter);
  tc = TrainConfig{};
  tc.lr = 0.0;
  CHECK_THROWS_AS(tc.validate(), InvalidParameter);
  tc = TrainConfig{};
  tc.steps = 0;
  CHECK_THROWS_AS(tc.validate(), InvalidParameter);
  tc = TrainConfig{};
  tc.report_every = 0;
  CHECK_THROWS_AS(tc.validate(), InvalidParameter);
  tc = TrainConfig{};
  tc.target_loss = -1.0;
  CHECK_THROWS_AS(tc.validate(), InvalidParameter);
}

TEST_CASE("manifest writing") {
  const std::string path = "manifest_test.txt";
  write_manifest(path, {{"seed", "42"}, {"preset", "unit"}});
  std::ifstream f(path);
  REQUIRE(bool(f));
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() == "seed = 42\npreset = unit\n");
  std::remove(path.c_str());
  CHECK_THROWS_AS(write_manifest("no_dir_here/x.txt", {}), std::runtime_error);
}

}  // TEST_SUITE
