// SPDX-License-Identifier: Apache-2.0
//
// Linear antenna array geometries.
//
// Four layouts are supported, all on a line and all re-centered so that
// the midpoint of the physical aperture sits at the origin:
//   CA   - collocated/uniform array, spacing d
//   USA  - uniformly sparse array, spacing eta*d
//   MOA  - modular array: N1 modules of M1 elements, module pitch Gamma*d
//   NA   - nested array: inner stage {m*d, m=1..N1} plus outer stage
//          {n*(N1+1)*d, n=1..N2}
//
// Element coordinates are built as (integer - center) * d with the integer
// grid index exact in double precision, so apertures match their closed
// forms bit for bit and symmetric layouts are exactly symmetric.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xlmimo/common.hpp"

namespace xlm {

enum class ArrayKindTag : std::uint8_t { ca = 0, usa = 1, moa = 2, na = 3 };

// Tagged parameter bundle describing an array family.  Unused fields are
// zero.  `p1..p4` meaning per tag:
//   ca:  p1=N
//   usa: p1=N,  p2=eta
//   moa: p1=N1, p2=M1, p3=Gamma
//   na:  p1=N1, p2=N2
struct ArrayKind {
  ArrayKindTag tag = ArrayKindTag::ca;
  std::int32_t p1 = 0, p2 = 0, p3 = 0, p4 = 0;

  static ArrayKind ca(int n);
  static ArrayKind usa(int n, int eta);
  static ArrayKind moa(int n1, int m1, int gamma);
  static ArrayKind na(int n1, int n2);

  std::string describe() const;
};

struct ArrayLayout {
  ArrayKind kind;
  double d = 0.0;                  // base spacing in meters
  std::vector<double> positions;   // element coordinates, strictly increasing

  int n() const { return static_cast<int>(positions.size()); }
  double aperture() const { return positions.back() - positions.front(); }
};

// Builders.  All throw InvalidParameter on non-positive counts, d <= 0,
// eta < 1, or Gamma < M1.
ArrayLayout build_array(const ArrayKind& kind, double d);
ArrayLayout build_ca(int n, double d);
ArrayLayout build_usa(int n, double d, int eta);
ArrayLayout build_moa(int n1, int m1, int gamma, double d);
ArrayLayout build_na(int n1, int n2, double d);

// Rayleigh distance 2 D^2 / lambda of the layout at carrier frequency f.
double rayleigh_distance(const ArrayLayout& layout, double f);

}  // namespace xlm
