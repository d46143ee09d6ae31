// Copyright 2026 The sfda Authors.
// Licensed under the Apache License, Version 2.0.

#include "sfda/harness/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include "sfda/error.hpp"
#include "sfda/harness/png_io.hpp"

namespace sfda::harness {
namespace {

using Color = std::array<std::uint8_t, 3>;

// 3x5 glyphs for "0123456789.-", one row per 3-bit mask.
constexpr std::array<std::array<std::uint8_t, 5>, 12> kGlyphs = {{
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7},
    {5, 5, 7, 1, 1}, {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1},
    {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7}, {0, 0, 0, 0, 2}, {0, 0, 7, 0, 0},
}};

class Canvas {
 public:
  Canvas(int w, int h, Color bg) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3) {
    fill(0, 0, w, h, bg);
  }

  void fill(int x0, int y0, int x1, int y1, Color c) {
    for (int y = std::max(0, y0); y < std::min(h_, y1); ++y) {
      for (int x = std::max(0, x0); x < std::min(w_, x1); ++x) {
        const std::size_t i = (static_cast<std::size_t>(y) * w_ + x) * 3;
        px_[i] = c[0];
        px_[i + 1] = c[1];
        px_[i + 2] = c[2];
      }
    }
  }

  // Draws digits, '.' and '-' at `scale` pixels per glyph cell.
  void text(int x, int y, const std::string& s, int scale, Color c) {
    for (char ch : s) {
      int g = -1;
      if (ch >= '0' && ch <= '9') g = ch - '0';
      if (ch == '.') g = 10;
      if (ch == '-') g = 11;
      if (g >= 0) {
        for (int r = 0; r < 5; ++r) {
          for (int b = 0; b < 3; ++b) {
            if (kGlyphs[g][r] & (4 >> b)) {
              fill(x + b * scale, y + r * scale, x + (b + 1) * scale, y + (r + 1) * scale, c);
            }
          }
        }
      }
      x += 4 * scale;
    }
  }

  void save(const std::filesystem::path& path) const { write_rgb_png(path, w_, h_, px_); }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

// Dark blue -> teal -> yellow ramp.
Color ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  constexpr std::array<std::array<double, 3>, 3> stops = {{
      {68, 1, 84}, {33, 145, 140}, {253, 231, 37}}};
  const double pos = t * 2.0;
  const int i = std::min(1, static_cast<int>(pos));
  const double f = pos - i;
  Color c;
  for (int k = 0; k < 3; ++k) {
    c[k] = static_cast<std::uint8_t>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
  }
  return c;
}

constexpr std::array<Color, 6> kPalette = {{
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40}, {148, 103, 189}, {140, 86, 75}}};

}  // namespace

void write_heatmap_png(const std::filesystem::path& path,
                       const std::vector<std::vector<std::optional<double>>>& values) {
  if (values.empty() || values.front().empty()) {
    fail(ErrorKind::kInvalidInput, "heatmap needs at least one cell");
  }
  const int rows = static_cast<int>(values.size());
  const int cols = static_cast<int>(values.front().size());
  constexpr int kCell = 64, kMargin = 8;
  Canvas canvas(cols * kCell + 2 * kMargin, rows * kCell + 2 * kMargin, {255, 255, 255});
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(values[r].size()) != cols) {
      fail(ErrorKind::kInvalidInput, "heatmap rows must have equal length");
    }
    for (int c = 0; c < cols; ++c) {
      const int x = kMargin + c * kCell, y = kMargin + r * kCell;
      const auto& v = values[r][c];
      canvas.fill(x + 1, y + 1, x + kCell - 1, y + kCell - 1, v ? ramp(*v) : Color{160, 160, 160});
      if (v) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.2f", *v);
        const Color ink = *v > 0.6 ? Color{0, 0, 0} : Color{255, 255, 255};
        canvas.text(x + 10, y + 24, buf, 3, ink);
      } else {
        canvas.text(x + 20, y + 24, "-", 3, {255, 255, 255});
      }
    }
  }
  canvas.save(path);
}

void write_histogram_png(const std::filesystem::path& path, const SsmHistogram& histogram) {
  if (histogram.counts.empty()) fail(ErrorKind::kInvalidInput, "histogram has no populations");
  const int bins = static_cast<int>(histogram.counts.begin()->second.size());
  const int groups = static_cast<int>(histogram.counts.size());
  std::vector<double> totals;
  for (const auto& [name, counts] : histogram.counts) {
    long total = 0;
    for (long n : counts) total += n;
    totals.push_back(std::max<long>(total, 1));
  }
  // Bars show per-population fractions so that unequal population sizes
  // remain comparable.
  double top = 0.0;
  int g = 0;
  for (const auto& [name, counts] : histogram.counts) {
    for (long n : counts) top = std::max(top, n / totals[g]);
    ++g;
  }
  if (top <= 0.0) top = 1.0;
  constexpr int kBar = 6, kGap = 4, kHeight = 240, kMargin = 12;
  const int group_w = groups * kBar + kGap;
  Canvas canvas(bins * group_w + 2 * kMargin, kHeight + 2 * kMargin + 20, {255, 255, 255});
  canvas.fill(kMargin, kMargin + kHeight, kMargin + bins * group_w, kMargin + kHeight + 1, {0, 0, 0});
  g = 0;
  for (const auto& [name, counts] : histogram.counts) {
    const Color color = kPalette[static_cast<std::size_t>(g) % kPalette.size()];
    for (int b = 0; b < bins; ++b) {
      const int h = static_cast<int>(std::lround(kHeight * (counts[b] / totals[g]) / top));
      const int x = kMargin + b * group_w + g * kBar;
      canvas.fill(x, kMargin + kHeight - h, x + kBar, kMargin + kHeight, color);
    }
    // Legend swatch plus the population mean.
    const int lx = kMargin + g * 90;
    canvas.fill(lx, kMargin + kHeight + 6, lx + 10, kMargin + kHeight + 16, color);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.3f", histogram.means.at(name));
    canvas.text(lx + 14, kMargin + kHeight + 6, buf, 2, {0, 0, 0});
    ++g;
  }
  canvas.save(path);
}

}  // namespace sfda::harness
