// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fmbrdf::cli {

struct Series {
  std::vector<double> x, y;
  std::array<std::uint8_t, 3> color{0, 0, 0};
  bool points = false;  // scatter instead of a polyline
};

/// Minimal line/scatter chart on a white canvas with a frame; axis ranges
/// cover all series. Written as an RGB PNG.
void plot_png(const std::string& path, const std::vector<Series>& series, int width = 480,
              int height = 320);

}  // namespace fmbrdf::cli
