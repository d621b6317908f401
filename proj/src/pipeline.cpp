// SPDX-License-Identifier: Apache-2.0

#include "xlmimo/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

#include "xlmimo/rng.hpp"

namespace xlm {

namespace {

// Named sub-streams of the training seed.
constexpr std::uint64_t kInitStage1 = 0x5731u;
constexpr std::uint64_t kInitStage2 = 0x5732u;
constexpr std::uint64_t kBatchOrder = 0xB472u;

// Yields mini-batches by reshuffling the training split at every epoch
// boundary (Fisher-Yates on a dedicated stream).  A tail shorter than one
// batch is dropped.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::uint32_t> order, int batch, std::uint64_t seed)
      : order_(std::move(order)), batch_(static_cast<std::size_t>(batch)),
        rng_(seed) {
    if (order_.size() < batch_)
      throw TrainingError("training split smaller than one batch");
    reshuffle();
  }

  const std::uint32_t* next() {
    if (pos_ + batch_ > order_.size()) reshuffle();
    const std::uint32_t* p = order_.data() + pos_;
    pos_ += batch_;
    return p;
  }

 private:
  void reshuffle() {
    for (std::size_t i = order_.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(
          rng_.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(order_[i], order_[j]);
    }
    pos_ = 0;
  }

  std::vector<std::uint32_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  Rng rng_;
};

void record_trace(TrainResult& res, const TrainConfig& tc, int step,
                  double loss, bool last) {
  if (step % tc.report_every == 0 || last)
    if (res.trace.empty() || res.trace.back().step != step)
      res.trace.push_back({step, loss});
}

double rms_of_interleaved(long double acc, std::size_t n) {
  if (n == 0 || acc <= 0.0L) return 1.0;
  return std::sqrt(static_cast<double>(acc / static_cast<long double>(n)));
}

}  // namespace

void TrainConfig::validate() const {
  if (batch < 1) throw InvalidParameter("train: batch must be >= 1");
  if (steps < 1) throw InvalidParameter("train: steps must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw InvalidParameter("train: lr must be positive and finite");
  if (report_every < 1) throw InvalidParameter("train: report_every must be >= 1");
  if (target_loss < 0.0) throw InvalidParameter("train: target_loss must be >= 0");
}

ad::NetConfig stage1_net_config(const Dataset& ds, const NetHyper& hyper) {
  ad::NetConfig cfg;
  cfg.in_ch = 2;
  cfg.out_ch = 2;
  cfg.in_h = ds.n_sc();
  cfg.in_w = ds.n_meas();
  cfg.stages = hyper.stages;
  cfg.c0 = hyper.base_channels;
  cfg.d_state = hyper.d_state;
  cfg.dt_rank = hyper.dt_rank;
  cfg.k_conv = hyper.k_conv;
  cfg.head = ad::HeadKind::position;
  cfg.raster_transpose = hyper.raster_transpose;
  cfg.validate();
  return cfg;
}

ad::NetConfig stage2_net_config(const Dataset& ds, const NetHyper& hyper) {
  ad::NetConfig cfg;
  cfg.in_ch = 4;   // prior Re/Im + two constant coordinate planes
  cfg.out_ch = 2;  // residual Re/Im
  cfg.in_h = ds.n_sc();
  cfg.in_w = ds.n_ant();
  cfg.stages = hyper.stages;
  cfg.c0 = hyper.base_channels;
  cfg.d_state = hyper.d_state;
  cfg.dt_rank = hyper.dt_rank;
  cfg.k_conv = hyper.k_conv;
  cfg.head = ad::HeadKind::channel;
  cfg.raster_transpose = hyper.raster_transpose;
  cfg.validate();
  return cfg;
}

NormScales compute_scales(const Dataset& ds,
                          const std::vector<std::uint32_t>& train_idx) {
  if (train_idx.empty())
    throw TrainingError("compute_scales: empty training split");
  long double y_acc = 0.0L, h_acc = 0.0L;
  std::size_t y_n = 0, h_n = 0;
  for (const auto i : train_idx) {
    const SampleRecord& rec = ds.samples.at(i);
    for (std::size_t t = 0; t + 1 < rec.y_pilot.size(); t += 2)
      y_acc += static_cast<long double>(rec.y_pilot[t]) * rec.y_pilot[t] +
               static_cast<long double>(rec.y_pilot[t + 1]) * rec.y_pilot[t + 1];
    y_n += rec.y_pilot.size() / 2;
    for (std::size_t t = 0; t + 1 < rec.h_los.size(); t += 2)
      h_acc += static_cast<long double>(rec.h_los[t]) * rec.h_los[t] +
               static_cast<long double>(rec.h_los[t + 1]) * rec.h_los[t + 1];
    h_n += rec.h_los.size() / 2;
  }
  NormScales sc;
  sc.y_rms = rms_of_interleaved(y_acc, y_n);
  sc.h_rms = rms_of_interleaved(h_acc, h_n);
  sc.r_max = ds.cfg.ue.r_max;
  return sc;
}

ad::ArrP<float> pilot_image(const std::vector<float>& y_pilot, int k, int m,
                            double y_rms) {
  if (k < 1 || m < 1 ||
      y_pilot.size() != 2u * static_cast<std::size_t>(k) * m)
    throw InvalidParameter("pilot_image: size does not match K x M");
  if (!(y_rms > 0.0)) throw InvalidParameter("pilot_image: y_rms must be > 0");
  auto img = ad::make_array<float>({2, k, m});
  const float s = static_cast<float>(1.0 / y_rms);
  const std::size_t plane = static_cast<std::size_t>(k) * m;
  for (std::size_t i = 0; i < plane; ++i) {
    img->val[i] = y_pilot[2 * i] * s;
    img->val[plane + i] = y_pilot[2 * i + 1] * s;
  }
  return img;
}

ad::ArrP<float> prior_image(const CMat& prior, double x_hat, double y_hat,
                            const NormScales& sc) {
  if (prior.rows < 1 || prior.cols < 1)
    throw InvalidParameter("prior_image: empty prior");
  if (!(sc.h_rms > 0.0) || !(sc.r_max > 0.0))
    throw InvalidParameter("prior_image: scales must be > 0");
  const int k = prior.rows, n = prior.cols;
  auto img = ad::make_array<float>({4, k, n});
  const double s = 1.0 / sc.h_rms;
  const std::size_t plane = static_cast<std::size_t>(k) * n;
  for (std::size_t i = 0; i < plane; ++i) {
    img->val[i] = static_cast<float>(prior.a[i].real() * s);
    img->val[plane + i] = static_cast<float>(prior.a[i].imag() * s);
  }
  const float px = static_cast<float>(x_hat / sc.r_max);
  const float py = static_cast<float>(y_hat / sc.r_max);
  for (std::size_t i = 0; i < plane; ++i) {
    img->val[2 * plane + i] = px;
    img->val[3 * plane + i] = py;
  }
  return img;
}

std::pair<double, double> predict_position(ad::Tape<float>& tape,
                                           const ad::CpMambaModel<float>& net,
                                           const NormScales& sc,
                                           const std::vector<float>& y_pilot,
                                           int k, int m) {
  auto img = pilot_image(y_pilot, k, m, sc.y_rms);
  auto out = ad::net_forward(tape, net, img);
  return {static_cast<double>(out->val[0]) * sc.r_max,
          static_cast<double>(out->val[1]) * sc.r_max};
}

CMat los_prior_from_xy(const ArrayLayout& layout, const CarrierConfig& carrier,
                       double x_hat, double y_hat, double r_floor) {
  if (!(r_floor > 0.0))
    throw InvalidParameter("los_prior_from_xy: r_floor must be > 0");
  double r = std::hypot(x_hat, y_hat);
  if (r < r_floor) r = r_floor;
  const double theta = std::atan2(y_hat, x_hat);
  return los_channel(layout, carrier, Polar{r, theta});
}

void set_requires_grad(ad::CpMambaModel<float>& model, bool enabled) {
  for (auto& p : ad::param_list(model)) {
    if (enabled) {
      p->ensure_grad();
    } else {
      p->requires_grad = false;
    }
  }
}

StageArtifacts train_stage1(const Dataset& ds,
                            const std::vector<std::uint32_t>& train_idx,
                            const NetHyper& hyper, const TrainConfig& tc) {
  tc.validate();
  const auto cfg = stage1_net_config(ds, hyper);
  Rng init_rng(substream(tc.seed, kInitStage1));
  StageArtifacts art{ad::build_model<float>(cfg, init_rng),
                     compute_scales(ds, train_idx), {}};
  auto params = ad::param_list(art.model);
  ad::Adam<float> opt(params, static_cast<float>(tc.lr));
  BatchSampler sampler(train_idx, tc.batch, substream(tc.seed, kBatchOrder));

  const int k = ds.n_sc(), m = ds.n_meas();
  // mse over the 2-vector averages the squared coordinate errors, so the
  // per-sample weight 2 r_max^2 / V makes the batch loss the mean squared
  // position error in m^2.
  const float w = static_cast<float>(2.0 * art.scales.r_max * art.scales.r_max /
                                     tc.batch);
  ad::Tape<float> tape;
  for (int step = 0; step < tc.steps; ++step) {
    const std::uint32_t* batch = sampler.next();
    ad::ArrP<float> total;
    for (int v = 0; v < tc.batch; ++v) {
      const SampleRecord& rec = ds.samples[batch[v]];
      auto img = pilot_image(rec.y_pilot, k, m, art.scales.y_rms);
      auto out = ad::net_forward(tape, art.model, img);
      auto tgt = ad::make_array<float>({2});
      tgt->val[0] = static_cast<float>(rec.x / art.scales.r_max);
      tgt->val[1] = static_cast<float>(rec.y / art.scales.r_max);
      auto li = ad::scale(tape, ad::mse(tape, out, tgt), w);
      total = total ? ad::add(tape, total, li) : li;
    }
    const double loss = total->val[0];
    if (!std::isfinite(loss))
      throw TrainingError("stage-1 training diverged: non-finite loss at step " +
                          std::to_string(step) + " (seed " +
                          std::to_string(tc.seed) + ")");
    opt.zero_grad();
    tape.backward(total);
    opt.step();
    art.result.final_loss = loss;
    art.result.steps_run = step + 1;
    const bool stop =
        tc.target_loss > 0.0 && loss <= tc.target_loss;
    record_trace(art.result, tc, step, loss, stop || step == tc.steps - 1);
    if (stop) break;
  }
  return art;
}

StageArtifacts train_stage2(const Dataset& ds,
                            const std::vector<std::uint32_t>& train_idx,
                            const ad::CpMambaModel<float>& stage1,
                            const NormScales& scales, const NetHyper& hyper,
                            const TrainConfig& tc) {
  tc.validate();
  const int k = ds.n_sc(), n = ds.n_ant(), m = ds.n_meas();

  // Position estimates are fixed for the whole run (stage 1 is frozen), so
  // compute them once up front.  The tape is discarded without a backward
  // pass, leaving stage-1 gradients untouched.
  std::vector<std::pair<double, double>> pos(train_idx.size());
  {
    ad::Tape<float> tape;
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
      const SampleRecord& rec = ds.samples.at(train_idx[i]);
      if (tc.oracle_positions) {
        pos[i] = {rec.x, rec.y};
      } else {
        pos[i] = predict_position(tape, stage1, scales, rec.y_pilot, k, m);
        tape.clear();
      }
    }
  }
  // Map dataset index -> position slot for batch lookups.
  std::vector<std::uint32_t> slot_of(ds.samples.size(), 0);
  for (std::size_t i = 0; i < train_idx.size(); ++i)
    slot_of.at(train_idx[i]) = static_cast<std::uint32_t>(i);

  const auto cfg = stage2_net_config(ds, hyper);
  Rng init_rng(substream(tc.seed, kInitStage2));
  StageArtifacts art{ad::build_model<float>(cfg, init_rng), scales, {}};
  auto params = ad::param_list(art.model);
  ad::Adam<float> opt(params, static_cast<float>(tc.lr));
  BatchSampler sampler(train_idx, tc.batch, substream(tc.seed, kBatchOrder));

  const std::size_t plane = static_cast<std::size_t>(k) * n;
  // mse averages over 2 K N real components; undoing that and the residual
  // normalization makes the batch loss the mean squared channel error.
  const float w = static_cast<float>(2.0 * plane * scales.h_rms *
                                     scales.h_rms / tc.batch);
  const double inv_h = 1.0 / scales.h_rms;

  ad::Tape<float> tape;
  for (int step = 0; step < tc.steps; ++step) {
    const std::uint32_t* batch = sampler.next();
    ad::ArrP<float> total;
    for (int v = 0; v < tc.batch; ++v) {
      const SampleRecord& rec = ds.samples[batch[v]];
      const auto [xh, yh] = pos[slot_of[batch[v]]];
      // Oracle mode rebuilds the prior from the stored polar coordinates,
      // reproducing the sample's own LoS component exactly.
      const CMat prior =
          tc.oracle_positions
              ? los_channel(ds.layout, ds.cfg.carrier, Polar{rec.r, rec.theta})
              : los_prior_from_xy(ds.layout, ds.cfg.carrier, xh, yh,
                                  ds.cfg.ue.r_min);
      auto img = prior_image(prior, xh, yh, scales);
      auto out = ad::net_forward(tape, art.model, img);
      auto tgt = ad::make_array<float>({2, k, n});
      for (std::size_t i = 0; i < plane; ++i) {
        tgt->val[i] = static_cast<float>(
            (rec.h[2 * i] - prior.a[i].real()) * inv_h);
        tgt->val[plane + i] = static_cast<float>(
            (rec.h[2 * i + 1] - prior.a[i].imag()) * inv_h);
      }
      auto li = ad::scale(tape, ad::mse(tape, out, tgt), w);
      total = total ? ad::add(tape, total, li) : li;
    }
    const double loss = total->val[0];
    if (!std::isfinite(loss))
      throw TrainingError("stage-2 training diverged: non-finite loss at step " +
                          std::to_string(step) + " (seed " +
                          std::to_string(tc.seed) + ")");
    opt.zero_grad();
    tape.backward(total);
    opt.step();
    art.result.final_loss = loss;
    art.result.steps_run = step + 1;
    const bool stop = tc.target_loss > 0.0 && loss <= tc.target_loss;
    record_trace(art.result, tc, step, loss, stop || step == tc.steps - 1);
    if (stop) break;
  }
  return art;
}

InferenceResult infer_sample(const ad::CpMambaModel<float>& stage1,
                             const ad::CpMambaModel<float>& stage2,
                             const NormScales& sc, const ArrayLayout& layout,
                             const CarrierConfig& carrier, double r_floor,
                             const std::vector<float>& y_pilot, int k, int n) {
  if (k < 1 || n < 1 || y_pilot.size() % (2u * static_cast<std::size_t>(k)) != 0)
    throw InvalidParameter("infer_sample: pilot size does not match K");
  const int m = static_cast<int>(y_pilot.size() / (2u * k));
  ad::Tape<float> tape;
  InferenceResult res;
  std::tie(res.x_hat, res.y_hat) =
      predict_position(tape, stage1, sc, y_pilot, k, m);
  tape.clear();
  const CMat prior = los_prior_from_xy(layout, carrier, res.x_hat, res.y_hat,
                                       r_floor);
  auto img = prior_image(prior, res.x_hat, res.y_hat, sc);
  auto out = ad::net_forward(tape, stage2, img);
  tape.clear();
  res.h_hat = CMat(k, n);
  const std::size_t plane = static_cast<std::size_t>(k) * n;
  for (std::size_t i = 0; i < plane; ++i)
    res.h_hat.a[i] = prior.a[i] +
                     cdouble(sc.h_rms * out->val[i],
                             sc.h_rms * out->val[plane + i]);
  return res;
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open manifest for writing: " + path);
  for (const auto& [key, value] : kv) f << key << " = " << value << "\n";
  f.flush();
  if (!f) throw std::runtime_error("failed writing manifest: " + path);
}

}  // namespace xlm
