// SPDX-License-Identifier: Apache-2.0
//
// Dataset generation and the XLMD container format.
//
// A dataset is a pure function of its generation config.  The combiner is
// drawn once per dataset from the stream at index 0 of the master seed and
// immediately quantized to storage precision (float), so the in-memory
// dataset and the serialized one describe the same numbers.  Sample i is
// generated from an independent stream at index i+1 with a fixed draw
// order: UE radius, UE angle, scatterers (radius, angle, K gains each),
// SNR, then observation noise.  Complex arrays are stored as interleaved
// re/im float32.  The full channel is not stored; it is rebuilt as the
// float sum h = h_los + h_nlos both at generation and at load time, so the
// two paths agree bit for bit.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xlmimo/array_geometry.hpp"
#include "xlmimo/channel.hpp"
#include "xlmimo/pilot.hpp"

namespace xlm {

struct UeBounds {
  double r_min = 0.1;
  double r_max = 10.0;
  double theta_min = -kPi / 2;
  double theta_max = 0.0;
};

struct GenConfig {
  std::uint64_t master_seed = 1;
  std::uint64_t count = 0;
  CarrierConfig carrier;
  ArrayKind kind;
  double d = 0.0;  // element spacing; <= 0 means half the carrier wavelength
  int n_slots = 16;  // P
  int n_rf = 4;      // RF chains per slot
  SceneConfig scene;
  UeBounds ue;
  double snr_min = 10.0;
  double snr_max = 10.0;

  double resolved_d() const {
    return d > 0.0 ? d : kSpeedOfLight / carrier.fc / 2.0;
  }
};

struct SampleRecord {
  std::uint64_t seed = 0;
  double r = 0.0, theta = 0.0;  // UE polar position
  double x = 0.0, y = 0.0;      // Cartesian equivalent, stored redundantly
  double snr_db = 0.0;
  double sigma2 = 0.0;
  std::vector<float> y_pilot;  // K x (P*N_RF), interleaved re/im
  std::vector<float> h_los;    // K x N, interleaved re/im
  std::vector<float> h_nlos;   // K x N, interleaved re/im
  std::vector<float> h;        // float sum of the two parts, never serialized
};

struct Dataset {
  GenConfig cfg;
  ArrayLayout layout;
  CombinerSet combiner;  // values are exactly representable in float
  std::vector<SampleRecord> samples;

  int n_sc() const { return cfg.carrier.n_sc; }
  int n_ant() const { return layout.n(); }
  int n_meas() const { return combiner.rows(); }
};

class DatasetError : public std::runtime_error {
 public:
  enum class Code { bad_magic, bad_version, truncated, dimension_mismatch,
                    io_failure };
  DatasetError(Code c, const std::string& what)
      : std::runtime_error(what), code(c) {}
  Code code;
};

// Generate one sample (exposed for tests that pin the draw order).
SampleRecord generate_sample(const GenConfig& cfg, const ArrayLayout& layout,
                             const CombinerSet& combiner, std::uint64_t index);

Dataset generate_dataset(const GenConfig& cfg);

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

// Canonical byte serialization of the generation config (the same bytes
// the file header uses) and its FNV-1a hash, used in run manifests.
std::string config_bytes(const GenConfig& cfg, const ArrayLayout& layout);
std::uint64_t config_hash(const GenConfig& cfg);

struct Split {
  std::vector<std::uint32_t> train, val, test;
};

// Shuffle indices 0..n-1 with the given seed and cut into three parts of
// round(f*n) elements (test takes the remainder).  Fractions must be
// non-negative and sum to 1 within 1e-9.
Split split_indices(std::uint64_t n, double f_train, double f_val,
                    double f_test, std::uint64_t seed);

// Promote an interleaved float array to a complex matrix.
CMat to_cmat(const std::vector<float>& interleaved, int rows, int cols);

}  // namespace xlm
