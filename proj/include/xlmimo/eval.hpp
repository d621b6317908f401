// SPDX-License-Identifier: Apache-2.0
//
// Evaluation: error metrics, classical baselines, and the SNR sweep.
//
// Baselines:
//   - LsEstimator: per-subcarrier minimum-norm least squares through the
//     known combiner, h_hat = Wbar^H (Wbar Wbar^H)^{-1} y.
//   - GridLocalizer: matched-filter position search over a log-radius x
//     linear-angle polar grid; the score of a grid point is the sum over
//     subcarriers of the normalized correlation between its compressed
//     steering vector and the observation.
//
// The sweep re-observes every test sample at each requested SNR on a
// dedicated noise sub-stream of the sample's own seed, so sweeps never
// disturb (and are never disturbed by) the stored dataset draws.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "xlmimo/dataset.hpp"
#include "xlmimo/linalg.hpp"
#include "xlmimo/pilot.hpp"
#include "xlmimo/pipeline.hpp"

namespace xlm {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Euclidean distance between an estimated and a true position.
double position_error(double x_hat, double y_hat, double x_true,
                      double y_true);

// ||h_hat - h_true||_F^2 / ||h_true||_F^2.  Throws EvalError on shape
// mismatch or a zero-norm truth.
double nmse_ratio(const CMat& h_hat, const CMat& h_true);

// Minimum-norm least-squares channel estimate through a known combiner.
class LsEstimator {
 public:
  explicit LsEstimator(const CombinerSet& cs, double min_pivot = 1e-10);

  // y: K x (P*N_RF) observation -> K x N channel estimate.
  CMat estimate(const CMat& y) const;

 private:
  CMat w_;            // stacked combiner, M x N
  CholeskyHerm chol_; // factor of Wbar Wbar^H
};

struct GridSpec {
  int n_r = 60;
  int n_theta = 90;
  double r_min = 0.1;
  double r_max = 10.0;
  double theta_min = -kPi / 2;
  double theta_max = 0.0;
  void validate() const;
};

class GridLocalizer {
 public:
  GridLocalizer(const CombinerSet& cs, const ArrayLayout& layout,
                const CarrierConfig& carrier, const GridSpec& spec);

  // Best-scoring grid point; ties resolve to the smallest radius, then the
  // smallest angle.
  Polar localize(const CMat& y) const;

  double radius_at(int i) const;
  double theta_at(int j) const;
  const GridSpec& spec() const { return spec_; }

 private:
  GridSpec spec_;
  int k_ = 0;
  int m_ = 0;
  // Per grid point, per subcarrier: unit-normalized compressed steering
  // vector, interleaved re/im float.
  std::vector<float> dict_;
};

struct SweepConfig {
  std::vector<double> snr_db;
  // Of: cpmamba, cpmamba-oracle (true positions into stage 2), ls, grid,
  // oracle (returns the truth; pins the metric zeros).
  std::vector<std::string> methods;
  GridSpec grid;
  std::uint64_t noise_tag = 0xE7A1;  // substream tag base; SNR i uses tag+i
};

struct SweepRow {
  std::string method;
  double snr_db = 0.0;
  double mpe_m = 0.0;  // NaN when the method does not estimate positions
  double nmse = 0.0;   // NaN when the method does not estimate channels
  int n = 0;           // samples aggregated
};

// Trained networks and scales for the learned methods; baselines ignore
// them, so null pointers are fine when only ls/grid are requested.
struct SweepModels {
  const ad::CpMambaModel<float>* stage1 = nullptr;
  const ad::CpMambaModel<float>* stage2 = nullptr;
  NormScales scales;
};

std::vector<SweepRow> run_sweep(const Dataset& ds,
                                const std::vector<std::uint32_t>& test_idx,
                                const SweepModels& models,
                                const SweepConfig& sc);

// CSV with header method,snr_db,mpe_m,nmse,nmse_db,n; absent metrics are
// written as "nan".
std::string sweep_csv(const std::vector<SweepRow>& rows);
void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows);

// Inverse of sweep_csv (the derived nmse_db column is dropped).  Throws
// EvalError on a missing file, wrong header, or malformed rows.
std::vector<SweepRow> parse_sweep_csv(const std::string& text);
std::vector<SweepRow> read_sweep_csv(const std::string& path);

}  // namespace xlm
