#ifndef PARTSDET_BLUR_HPP
#define PARTSDET_BLUR_HPP

#include <cmath>
#include <vector>

#include "partsdet/errors.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

// L1-normalized 1-D gaussian kernel with radius ceil(3*sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0))
    throw invalid_parameter_error("gaussian_blur: sigma must be > 0");
  const int radius = (int)std::ceil(3.0 * sigma);
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (double(i) * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace detail {
// Reflect index about the edge pixel (no edge repeat): -1 -> 1, n -> n-2.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}
}  // namespace detail

// Separable gaussian convolution with reflect border padding. Keeps
// [0,1]-valued inputs in [0,1] (the kernel is a convex combination).
inline GridF gaussian_blur(const GridF& src, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const int radius = ((int)k.size() - 1) / 2;
  const int h = src.h, w = src.w;

  GridF tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {  // horizontal pass
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[i + radius] * src.at(y, detail::reflect_index(x + i, w));
      tmp.at(y, x) = (float)acc;
    }
  }
  for (int y = 0; y < h; ++y) {  // vertical pass
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[i + radius] * tmp.at(detail::reflect_index(y + i, h), x);
      out.at(y, x) = (float)acc;
    }
  }
  return out;
}

}  // namespace partsdet

#endif
