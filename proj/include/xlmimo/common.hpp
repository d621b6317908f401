// SPDX-License-Identifier: Apache-2.0
//
// xlmimo: near-field sparse XL-MIMO channel estimation and positioning lab

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace xlm {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

using cdouble = std::complex<double>;

// Thrown on invalid user-supplied parameters (counts, ranges, shapes).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace xlm
