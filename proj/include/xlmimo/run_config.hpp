// SPDX-License-Identifier: Apache-2.0
//
// Run configuration files.
//
// A run config is a JSON document with five sections: "dataset",
// "network", "train_stage1", "train_stage2", and "eval", plus an optional
// top-level "preset" provenance string.  Every key has a default; keys
// absent from the document are defaulted and reported through the notice
// list, unknown keys are rejected (typo protection).  Angles appear in
// the file in degrees and are converted to radians on load.
//
// Key set (defaults in parentheses):
//   dataset: master_seed(1) count(256) fc_hz(28e9) bw_hz(500e6)
//            n_subcarriers(64) array("ca") array_params([128])
//            spacing_m(0 = half wavelength) n_slots(16) n_rf(4)
//            snr_min_db(0) snr_max_db(20)
//     scene: l_min(1) l_max(3) rays_per_cluster(4) nlos_scale(1)
//            r_min_m(0.1) r_max_m(10) theta_min_deg(-90) theta_max_deg(0)
//     ue:    r_min_m(0.1) r_max_m(10) theta_min_deg(-90) theta_max_deg(0)
//     split: train(0.8) val(0) test(0.2) seed(1234)
//   network: stages(4) base_channels(16) d_state(16) dt_rank(0 = auto)
//            k_conv(4) raster_transpose(false)
//   train_stage1 / train_stage2:
//            batch(32) steps(500) lr(1e-3) seed(1) report_every(25)
//            target_loss(0 = off) oracle_positions(false)
//   eval:    snr_db([0,10,20]) methods(["cpmamba","ls","grid"])
//     grid:  n_r(60) n_theta(90) r_min_m(0.1) r_max_m(10)
//            theta_min_deg(-90) theta_max_deg(0)

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "xlmimo/dataset.hpp"
#include "xlmimo/eval.hpp"
#include "xlmimo/pipeline.hpp"

namespace xlm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SplitSpec {
  double f_train = 0.8;
  double f_val = 0.0;
  double f_test = 0.2;
  std::uint64_t seed = 1234;
};

struct RunConfig {
  GenConfig gen;
  SplitSpec split;
  NetHyper net;
  TrainConfig train1;
  TrainConfig train2;
  SweepConfig sweep;
  std::string preset;  // provenance only

  RunConfig();  // library defaults (see header comment)
};

// Parse from JSON text.  Defaulted keys are appended to `notices` (if
// given) as human-readable lines.  Unknown keys, type errors, and JSON
// syntax errors raise ConfigError.
RunConfig parse_run_config(const std::string& json_text,
                           std::vector<std::string>* notices);

// Same, reading the document from a file.
RunConfig load_run_config(const std::string& path,
                          std::vector<std::string>* notices);

// Serialize the full key set (round-trips through parse_run_config with
// no notices).
std::string run_config_json(const RunConfig& rc);

// Built-in presets: ca-desk, usa-desk, moa-desk, na-desk (paper-scale
// arrays at reduced sample counts), na-overfit (8-sample memorization
// check), trend-na and trend-ca (statistical trend experiments).
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace xlm
