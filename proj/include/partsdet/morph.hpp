#ifndef PARTSDET_MORPH_HPP
#define PARTSDET_MORPH_HPP

#include <algorithm>

#include "partsdet/errors.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

// Iterated binary dilation with a 3x3 all-ones structuring element.
// The border is clipped: the element never wraps or reads outside.
inline GridU8 dilate(const GridU8& mask, int iterations) {
  if (iterations < 0)
    throw invalid_parameter_error("dilate: iterations must be >= 0");
  GridU8 cur = mask;
  GridU8 next(mask.h, mask.w, 0);
  for (int it = 0; it < iterations; ++it) {
    for (int y = 0; y < cur.h; ++y) {
      const int ylo = std::max(0, y - 1), yhi = std::min(cur.h - 1, y + 1);
      for (int x = 0; x < cur.w; ++x) {
        const int xlo = std::max(0, x - 1), xhi = std::min(cur.w - 1, x + 1);
        uint8_t v = 0;
        for (int yy = ylo; yy <= yhi && !v; ++yy)
          for (int xx = xlo; xx <= xhi; ++xx)
            if (cur.at(yy, xx)) { v = 1; break; }
        next.at(y, x) = v;
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

}  // namespace partsdet

#endif
