// SPDX-License-Identifier: Apache-2.0
//
// Two-stage training and inference pipeline.
//
// Stage 1 regresses the UE position from the compressed pilot observation:
// the K x (P*N_RF) complex measurement matrix enters the network as a
// two-plane real image and the position head emits normalized Cartesian
// coordinates.  Stage 2 rebuilds the full channel: the line-of-sight
// component implied by the stage-1 position estimate enters as a prior
// image (plus two constant coordinate planes), and the channel head emits
// the residual the prior misses.  Stage 1 stays frozen while stage 2
// trains.
//
// All normalization scales (pilot RMS, LoS-channel RMS, scene radius
// bound) are computed once over the training split and stored in both
// checkpoints so that inference needs no access to the dataset.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xlmimo/autodiff.hpp"
#include "xlmimo/channel.hpp"
#include "xlmimo/checkpoint.hpp"
#include "xlmimo/dataset.hpp"
#include "xlmimo/net.hpp"

namespace xlm {

// Thrown when a training run cannot continue (diverged loss, bad split).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Network hyper-parameters shared by both stages; the per-stage input and
// output shapes are derived from the dataset.
struct NetHyper {
  int stages = 4;
  int base_channels = 16;
  int d_state = 16;
  int dt_rank = 0;  // 0: ceil(channels / 16)
  int k_conv = 4;
  bool raster_transpose = false;
};

ad::NetConfig stage1_net_config(const Dataset& ds, const NetHyper& hyper);
ad::NetConfig stage2_net_config(const Dataset& ds, const NetHyper& hyper);

// Pilot RMS / LoS RMS / radius bound over a training split.  RMS values
// are root-mean-square complex magnitudes; a degenerate all-zero split
// falls back to 1 so scaling stays a no-op.
NormScales compute_scales(const Dataset& ds,
                          const std::vector<std::uint32_t>& train_idx);

// [2, K, M] image: Re and Im planes of the pilot matrix, divided by the
// pilot RMS.  `y_pilot` is interleaved re/im, row-major K x M.
ad::ArrP<float> pilot_image(const std::vector<float>& y_pilot, int k, int m,
                            double y_rms);

// [4, K, N] image: Re and Im planes of the LoS prior divided by the LoS
// RMS, then two constant planes holding the normalized position estimate.
ad::ArrP<float> prior_image(const CMat& prior, double x_hat, double y_hat,
                            const NormScales& sc);

// Stage-1 inference: position estimate in meters.
std::pair<double, double> predict_position(ad::Tape<float>& tape,
                                           const ad::CpMambaModel<float>& net,
                                           const NormScales& sc,
                                           const std::vector<float>& y_pilot,
                                           int k, int m);

// LoS channel implied by a Cartesian position estimate.  The radius is
// clamped below at `r_floor` so a degenerate estimate near the origin
// still yields a valid prior.
CMat los_prior_from_xy(const ArrayLayout& layout, const CarrierConfig& carrier,
                       double x_hat, double y_hat, double r_floor);

// Toggle gradient tracking for every parameter of a model (frozen models
// skip tape recording entirely).
void set_requires_grad(ad::CpMambaModel<float>& model, bool enabled);

struct TrainConfig {
  int batch = 32;
  int steps = 500;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int report_every = 25;     // trace cadence in steps
  double target_loss = 0.0;  // early stop when reported loss <= this (0: off)
  bool oracle_positions = false;  // stage 2 only: use true positions
  void validate() const;
};

struct TraceRow {
  int step = 0;      // 0-based optimizer step
  double loss = 0.0; // batch loss, physical units (m^2 / squared channel norm)
};

struct TrainResult {
  std::vector<TraceRow> trace;
  double final_loss = 0.0;
  int steps_run = 0;
};

struct StageArtifacts {
  ad::CpMambaModel<float> model;
  NormScales scales;
  TrainResult result;
};

// Stage-1 training: loss is the batch-mean squared position error in m^2.
StageArtifacts train_stage1(const Dataset& ds,
                            const std::vector<std::uint32_t>& train_idx,
                            const NetHyper& hyper, const TrainConfig& tc);

// Stage-2 training: loss is the batch-mean squared channel reconstruction
// error.  `stage1` is used only to precompute position estimates (or
// bypassed entirely under `oracle_positions`) and is never updated.
StageArtifacts train_stage2(const Dataset& ds,
                            const std::vector<std::uint32_t>& train_idx,
                            const ad::CpMambaModel<float>& stage1,
                            const NormScales& scales, const NetHyper& hyper,
                            const TrainConfig& tc);

// Full two-stage inference for one pilot observation.
struct InferenceResult {
  double x_hat = 0.0;
  double y_hat = 0.0;
  CMat h_hat;  // K x N reconstructed channel
};

InferenceResult infer_sample(const ad::CpMambaModel<float>& stage1,
                             const ad::CpMambaModel<float>& stage2,
                             const NormScales& sc, const ArrayLayout& layout,
                             const CarrierConfig& carrier, double r_floor,
                             const std::vector<float>& y_pilot, int k, int n);

// Plain-text `key = value` run manifest.
void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace xlm
