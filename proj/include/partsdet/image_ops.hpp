#ifndef PARTSDET_IMAGE_OPS_HPP
#define PARTSDET_IMAGE_OPS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "partsdet/errors.hpp"
#include "partsdet/image_io.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

// Crop the (half-open) box out of the frame, clipped to the frame bounds,
// then nearest-neighbor resample to out_size x out_size. The index mapping
// is source = floor(dst_index * src_extent / out_size).
inline Image crop_and_resize(const Image& frame,
                             const std::array<double, 4>& box,
                             int out_size = 288) {
  if (out_size <= 0)
    throw invalid_parameter_error("crop_and_resize: out_size must be > 0");
  if (!(box[2] > box[0]) || !(box[3] > box[1]))
    throw invalid_box_error("crop_and_resize: degenerate box");
  int x0 = std::max(0, (int)std::floor(box[0]));
  int y0 = std::max(0, (int)std::floor(box[1]));
  int x1 = std::min(frame.w, (int)std::ceil(box[2]));
  int y1 = std::min(frame.h, (int)std::ceil(box[3]));
  if (x1 <= x0 || y1 <= y0)
    throw invalid_box_error("crop_and_resize: box does not intersect frame");
  const int sw = x1 - x0, sh = y1 - y0;

  Image out(out_size, out_size);
  for (int i = 0; i < out_size; ++i) {
    const int sy = y0 + (int)((long long)i * sh / out_size);
    for (int j = 0; j < out_size; ++j) {
      const int sx = x0 + (int)((long long)j * sw / out_size);
      for (int c = 0; c < 3; ++c) out.at(i, j, c) = frame.at(sy, sx, c);
    }
  }
  return out;
}

// Encode-then-decode through a baseline JPEG codec.
inline Image jpeg_roundtrip(const Image& img, int quality = 95) {
  if (quality < 1 || quality > 100)
    throw invalid_parameter_error("jpeg_roundtrip: quality must be in [1,100]");
  return jpeg_decode(jpeg_encode(img, quality));
}

inline double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw input_error("psnr: shape mismatch");
  double mse = 0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    const double d = double(a.v[i]) - b.v[i];
    mse += d * d;
  }
  mse /= double(a.v.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace partsdet

#endif
