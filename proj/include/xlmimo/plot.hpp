// SPDX-License-Identifier: Apache-2.0
//
// Static SVG renderings of sweep results: one curve per method, SNR on
// the x axis, either mean positioning error in meters or NMSE in dB on
// the y axis.  Rows whose metric is NaN (methods that do not produce it)
// are skipped; a method with no finite points contributes no curve.

#pragma once

#include <string>
#include <vector>

#include "xlmimo/eval.hpp"

namespace xlm {

enum class PlotMetric { mpe, nmse };

// Throws EvalError when no finite data exists for the metric.
std::string plot_svg(const std::vector<SweepRow>& rows, PlotMetric metric);

void write_plot_svg(const std::string& path,
                    const std::vector<SweepRow>& rows, PlotMetric metric);

}  // namespace xlm
