#ifndef PARTSDET_PLOT_HPP
#define PARTSDET_PLOT_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "partsdet/forensics.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {
namespace plot {

// 5x7 bitmap glyphs for the characters the chart labels need.
inline const uint8_t* glyph5x7(char ch) {
  static const struct {
    char c;
    uint8_t rows[7];
  } table[] = {
      {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
      {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}},
      {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
      {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
      {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
      {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
      {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
      {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
      {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
      {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
      {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
      {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
      {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
      {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
      {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
      {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x04}},
  };
  for (const auto& e : table)
    if (e.c == ch) return e.rows;
  return nullptr;
}

inline void draw_text(Image& img, int x, int y, const std::string& text,
                      float r, float g, float b) {
  int cx = x;
  for (char ch : text) {
    if (char up = char(std::toupper(ch)); const uint8_t* rows = glyph5x7(up)) {
      for (int ry = 0; ry < 7; ++ry)
        for (int rx = 0; rx < 5; ++rx)
          if (rows[ry] & (1 << (4 - rx))) {
            const int py = y + ry, px = cx + rx;
            if (py >= 0 && py < img.h && px >= 0 && px < img.w) {
              img.at(py, px, 0) = r;
              img.at(py, px, 1) = g;
              img.at(py, px, 2) = b;
            }
          }
    }
    cx += 6;
  }
}

inline void fill_rect(Image& img, int x0, int y0, int x1, int y1, float r,
                      float g, float b) {
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(img.w - 1, x1);
  y1 = std::min(img.h - 1, y1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
}

// 2x2 grid of per-region bar charts.
inline Image render_histogram_grid(const std::vector<RegionHistogram>& hs) {
  const int pw = 360, ph = 240;
  Image img(2 * ph, 2 * pw, 1.0f);
  for (size_t k = 0; k < hs.size() && k < 4; ++k) {
    const RegionHistogram& h = hs[k];
    const int ox = int(k % 2) * pw, oy = int(k / 2) * ph;
    const int left = ox + 20, right = ox + pw - 15;
    const int top = oy + 30, bottom = oy + ph - 20;

    int64_t maxc = 1;
    for (int64_t c : h.counts) maxc = std::max(maxc, c);
    const int nb = int(h.counts.size());
    for (int i = 0; i < nb; ++i) {
      const int bx0 = left + (right - left) * i / nb;
      const int bx1 = left + (right - left) * (i + 1) / nb - 1;
      const int bh = int(double(bottom - top) * double(h.counts[i]) / maxc);
      if (bh > 0)
        fill_rect(img, bx0, bottom - bh, bx1, bottom - 1, 0.25f, 0.45f, 0.75f);
    }
    fill_rect(img, left, bottom, right, bottom, 0.1f, 0.1f, 0.1f);   // x axis
    fill_rect(img, left, top, left, bottom, 0.1f, 0.1f, 0.1f);       // y axis
    std::string label = region_name(h.region);
    std::transform(label.begin(), label.end(), label.begin(), ::toupper);
    draw_text(img, left, oy + 12, label, 0.1f, 0.1f, 0.1f);
    draw_text(img, right - 6 * 10, oy + 12,
              std::to_string(h.total()), 0.4f, 0.4f, 0.4f);
  }
  return img;
}

}  // namespace plot
}  // namespace partsdet

#endif
