// SPDX-License-Identifier: Apache-2.0

#include "xlmimo/array_geometry.hpp"

#include <algorithm>
#include <cmath>

namespace xlm {

ArrayKind ArrayKind::ca(int n) {
  ArrayKind k;
  k.tag = ArrayKindTag::ca;
  k.p1 = n;
  return k;
}

ArrayKind ArrayKind::usa(int n, int eta) {
  ArrayKind k;
  k.tag = ArrayKindTag::usa;
  k.p1 = n;
  k.p2 = eta;
  return k;
}

ArrayKind ArrayKind::moa(int n1, int m1, int gamma) {
  ArrayKind k;
  k.tag = ArrayKindTag::moa;
  k.p1 = n1;
  k.p2 = m1;
  k.p3 = gamma;
  return k;
}

ArrayKind ArrayKind::na(int n1, int n2) {
  ArrayKind k;
  k.tag = ArrayKindTag::na;
  k.p1 = n1;
  k.p2 = n2;
  return k;
}

std::string ArrayKind::describe() const {
  switch (tag) {
    case ArrayKindTag::ca:
      return "ca(" + std::to_string(p1) + ")";
    case ArrayKindTag::usa:
      return "usa(" + std::to_string(p1) + ",eta=" + std::to_string(p2) + ")";
    case ArrayKindTag::moa:
      return "moa(" + std::to_string(p1) + "x" + std::to_string(p2) +
             ",gamma=" + std::to_string(p3) + ")";
    case ArrayKindTag::na:
      return "na(" + std::to_string(p1) + "+" + std::to_string(p2) + ")";
  }
  return "array(?)";
}

namespace {

// Turn a strictly increasing integer grid into centered physical
// coordinates.  Each coordinate is (index - center) * d with the
// subtraction exact (indices and their half-integer center are exact in
// double), so there is a single rounding per element and the layout is
// exactly symmetric about zero.
ArrayLayout finalize(ArrayKind kind, double d, std::vector<double> grid) {
  if (!(d > 0.0)) throw InvalidParameter("array: spacing d must be positive");
  const double center = (grid.front() + grid.back()) * 0.5;
  ArrayLayout layout;
  layout.kind = kind;
  layout.d = d;
  layout.positions.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    layout.positions[i] = (grid[i] - center) * d;
  return layout;
}

}  // namespace

ArrayLayout build_ca(int n, double d) {
  if (n < 1) throw InvalidParameter("ca: element count must be >= 1");
  std::vector<double> grid(n);
  for (int q = 0; q < n; ++q) grid[q] = q;
  return finalize(ArrayKind::ca(n), d, std::move(grid));
}

ArrayLayout build_usa(int n, double d, int eta) {
  if (n < 1) throw InvalidParameter("usa: element count must be >= 1");
  if (eta < 1) throw InvalidParameter("usa: eta must be >= 1");
  std::vector<double> grid(n);
  for (int q = 0; q < n; ++q) grid[q] = static_cast<double>(q) * eta;
  return finalize(ArrayKind::usa(n, eta), d, std::move(grid));
}

ArrayLayout build_moa(int n1, int m1, int gamma, double d) {
  if (n1 < 1 || m1 < 1)
    throw InvalidParameter("moa: module and element counts must be >= 1");
  if (gamma < m1)
    throw InvalidParameter("moa: module pitch gamma must be >= M1");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n1) * m1);
  for (int nmod = 0; nmod < n1; ++nmod)
    for (int m = 0; m < m1; ++m)
      grid.push_back(static_cast<double>(nmod) * gamma + m);
  return finalize(ArrayKind::moa(n1, m1, gamma), d, std::move(grid));
}

ArrayLayout build_na(int n1, int n2, double d) {
  if (n1 < 1 || n2 < 1)
    throw InvalidParameter("na: stage element counts must be >= 1");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n1) + n2);
  for (int m = 1; m <= n1; ++m) grid.push_back(m);
  for (int n = 1; n <= n2; ++n)
    grid.push_back(static_cast<double>(n) * (n1 + 1));
  // The two stages interleave only at the join; the union is already
  // sorted and duplicate-free because the inner stage tops out at N1*d and
  // the outer stage starts at (N1+1)*d.
  return finalize(ArrayKind::na(n1, n2), d, std::move(grid));
}

ArrayLayout build_array(const ArrayKind& kind, double d) {
  switch (kind.tag) {
    case ArrayKindTag::ca:
      return build_ca(kind.p1, d);
    case ArrayKindTag::usa:
      return build_usa(kind.p1, d, kind.p2);
    case ArrayKindTag::moa:
      return build_moa(kind.p1, kind.p2, kind.p3, d);
    case ArrayKindTag::na:
      return build_na(kind.p1, kind.p2, d);
  }
  throw InvalidParameter("array: unknown kind tag");
}

double rayleigh_distance(const ArrayLayout& layout, double f) {
  if (!(f > 0.0)) throw InvalidParameter("rayleigh: frequency must be positive");
  const double aperture = layout.aperture();
  const double lambda = kSpeedOfLight / f;
  return 2.0 * aperture * aperture / lambda;
}

}  // namespace xlm
