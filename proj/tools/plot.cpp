// SPDX-License-Identifier: Apache-2.0

#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fmbrdf/scene.hpp"

namespace fmbrdf::cli {

namespace {

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), rgb_(static_cast<std::size_t>(w) * h * 3, 255) {}

  void set(int x, int y, const std::array<std::uint8_t, 3>& c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    std::copy(c.begin(), c.end(), &rgb_[(static_cast<std::size_t>(y) * w_ + x) * 3]);
  }

  void line(int x0, int y0, int x1, int y1, const std::array<std::uint8_t, 3>& c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) return;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  const std::vector<std::uint8_t>& rgb() const { return rgb_; }

 private:
  int w_, h_;
  std::vector<std::uint8_t> rgb_;
};

}  // namespace

void plot_png(const std::string& path, const std::vector<Series>& series, int width,
              int height) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) {
    x0 = std::isfinite(x0) ? x0 - 1.0 : 0.0;
    x1 = x0 + 2.0;
  }
  if (!(y1 > y0)) {
    y0 = std::isfinite(y0) ? y0 - 1.0 : 0.0;
    y1 = y0 + 2.0;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const int m = 24;
  const int pw = width - 2 * m, ph = height - 2 * m;
  auto px = [&](double x) { return m + static_cast<int>(std::lround((x - x0) / (x1 - x0) * pw)); };
  auto py = [&](double y) {
    return height - m - static_cast<int>(std::lround((y - y0) / (y1 - y0) * ph));
  };

  Canvas cv(width, height);
  const std::array<std::uint8_t, 3> gray{160, 160, 160};
  cv.line(m, m, m, height - m, gray);
  cv.line(m, height - m, width - m, height - m, gray);
  cv.line(width - m, m, width - m, height - m, gray);
  cv.line(m, m, width - m, m, gray);
  for (const Series& s : series) {
    bool have = false;
    int lx = 0, ly = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const int x = px(s.x[i]), y = py(s.y[i]);
      if (s.points) {
        cv.set(x, y, s.color);
      } else {
        if (have) cv.line(lx, ly, x, y, s.color);
        lx = x;
        ly = y;
        have = true;
      }
    }
  }
  write_png_rgb(path, width, height, cv.rgb());
}

}  // namespace fmbrdf::cli
