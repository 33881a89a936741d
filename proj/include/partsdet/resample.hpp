#ifndef PARTSDET_RESAMPLE_HPP
#define PARTSDET_RESAMPLE_HPP

#include "partsdet/errors.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

// Area-average pooling: target cell (i, j) averages the source block
// rows [floor(i*H/H'), floor((i+1)*H/H')) x cols [floor(j*W/W'), ...).
// The result stays in [0,1] and is a soft target (not re-binarized).
inline GridF downsample_mask(const GridF& src, int th, int tw) {
  if (th <= 0 || tw <= 0)
    throw invalid_parameter_error("downsample_mask: target must be positive");
  if (th > src.h || tw > src.w)
    throw invalid_parameter_error(
        "downsample_mask: target larger than source");
  GridF out(th, tw);
  for (int i = 0; i < th; ++i) {
    const int y0 = (int)((long long)i * src.h / th);
    const int y1 = (int)((long long)(i + 1) * src.h / th);
    for (int j = 0; j < tw; ++j) {
      const int x0 = (int)((long long)j * src.w / tw);
      const int x1 = (int)((long long)(j + 1) * src.w / tw);
      double acc = 0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) acc += src.at(y, x);
      out.at(i, j) = (float)(acc / (double(y1 - y0) * (x1 - x0)));
    }
  }
  return out;
}

}  // namespace partsdet

#endif
