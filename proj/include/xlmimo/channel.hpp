// SPDX-License-Identifier: Apache-2.0
//
// Near-field wideband channel synthesis.
//
// The base station is a linear array on the x-axis (see array_geometry);
// users and scatterers live in the plane, described in polar coordinates
// (r, theta) with theta the angle from the array axis (default scene:
// theta in [-pi/2, 0], the quadrant x >= 0, y <= 0).  A point at distance
// R and angle phi has distance to element q
//
//   r_q = sqrt(R^2 + x_q^2 - 2 R x_q cos(phi))
//
// (law of cosines with phi the angle between the array line and the ray to
// the point).  The spherical-wave steering vector at frequency f is
// a_q = exp(-j 2 pi f r_q / c), per-element unit modulus.  The channel on
// subcarrier k is a LoS ray plus G rays from each of L scatter clusters:
//
//   h[k] = alpha0 a(r, theta, f_k)
//        + sum_{l,g} alpha_{l,g}[k] a(R_{l,g}, phi_{l,g}, f_k)
//
// with alpha0 = 10^(Q R / 10) / (4 pi R) a molecular-absorption-weighted
// spreading gain and alpha_{l,g}[k] ~ CN(0,1) i.i.d. across rays and
// subcarriers, optionally scaled by a cluster gain factor.

#pragma once

#include <vector>

#include "xlmimo/array_geometry.hpp"
#include "xlmimo/common.hpp"
#include "xlmimo/linalg.hpp"
#include "xlmimo/rng.hpp"

namespace xlm {

struct CarrierConfig {
  double fc = 28e9;   // carrier frequency, Hz
  double bw = 500e6;  // total bandwidth, Hz
  int n_sc = 64;      // number of subcarriers K
  double q_db_per_m = -0.00045;  // absorption coefficient, dB per meter
};

// Frequency of subcarrier k (0-based), spanning [fc - B/2, fc + B/2).
double subcarrier_freq(const CarrierConfig& c, int k);

// Polar position in the array plane.  Cartesian coordinates are derived:
// x along the array axis, y towards the scene.
struct Polar {
  double r = 0.0;      // meters
  double theta = 0.0;  // radians, angle from the array axis

  double x() const { return r * std::cos(theta); }
  double y() const { return r * std::sin(theta); }
};

// Distance from a point at (R, phi) to an element at coordinate xq.
// Tiny negative arguments of the square root (roundoff for points exactly
// on the array axis) are clipped to zero; anything below -1e-15 is a
// domain error.
double element_distance(double big_r, double phi, double xq);

// Per-element unit-modulus spherical-wave steering vector at frequency f.
std::vector<cdouble> steering_vector(const ArrayLayout& layout, double big_r,
                                     double phi, double f);

// LoS amplitude gain: free-space spreading times molecular absorption.
double los_gain(double big_r, double q_db_per_m);

// One scatter ray: position plus one complex gain per subcarrier.
struct Scatterer {
  Polar pos;
  std::vector<cdouble> gain;  // length K
};

struct SceneConfig {
  int l_min = 1;            // cluster count lower bound (inclusive)
  int l_max = 3;            // cluster count upper bound (inclusive)
  int rays_per_cluster = 4; // G
  double nlos_scale = 1.0;  // multiplies every scatter gain
  double r_min = 0.1;       // scatterer radial range, meters
  double r_max = 10.0;
  double theta_min = -kPi / 2;  // scatterer angular range, radians
  double theta_max = 0.0;
};

// Draw L ~ U{l_min..l_max} clusters of G rays each.  Draw order per ray is
// fixed: radius, angle, then K complex gains.
std::vector<Scatterer> sample_scatterers(Rng& rng, const SceneConfig& scene,
                                         int n_sc);

struct ChannelRealization {
  Polar ue;
  CMat h_los;   // K x N
  CMat h_nlos;  // K x N
  CMat h;       // K x N, elementwise sum of the two parts
};

// LoS-only channel for a given position.  This is the single code path for
// the LoS component: the synthesizer below calls it, and the second
// pipeline stage calls it to turn a position estimate into a prior.
CMat los_channel(const ArrayLayout& layout, const CarrierConfig& carrier,
                 const Polar& ue);

ChannelRealization synthesize_channel(const ArrayLayout& layout,
                                      const CarrierConfig& carrier,
                                      const Polar& ue,
                                      const std::vector<Scatterer>& clusters);

}  // namespace xlm
