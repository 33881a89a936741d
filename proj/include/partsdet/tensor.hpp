#ifndef PARTSDET_TENSOR_HPP
#define PARTSDET_TENSOR_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "partsdet/errors.hpp"

namespace partsdet {

// Dense H x W grid, row-major. Used for masks and logit maps.
template <typename T>
struct Grid {
  int h = 0;
  int w = 0;
  std::vector<T> v;

  Grid() = default;
  Grid(int h_, int w_, T fill = T(0)) : h(h_), w(w_), v(size_t(h_) * w_, fill) {}

  T& at(int y, int x) { return v[size_t(y) * w + x]; }
  const T& at(int y, int x) const { return v[size_t(y) * w + x]; }
  size_t size() const { return v.size(); }
  bool same_shape(const Grid& o) const { return h == o.h && w == o.w; }

  void fill(T val) { std::fill(v.begin(), v.end(), val); }
};

using GridF = Grid<float>;
using GridU8 = Grid<uint8_t>;

template <typename T, typename U>
Grid<T> grid_cast(const Grid<U>& g) {
  Grid<T> out(g.h, g.w);
  for (size_t i = 0; i < g.v.size(); ++i) out.v[i] = static_cast<T>(g.v[i]);
  return out;
}

// Channels-first activation tensor (C, H, W), row-major per channel.
template <typename T>
struct Chw {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<T> v;

  Chw() = default;
  Chw(int c_, int h_, int w_, T fill = T(0))
      : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, fill) {}

  T* plane(int ch) { return v.data() + size_t(ch) * h * w; }
  const T* plane(int ch) const { return v.data() + size_t(ch) * h * w; }
  T& at(int ch, int y, int x) { return v[(size_t(ch) * h + y) * w + x]; }
  const T& at(int ch, int y, int x) const {
    return v[(size_t(ch) * h + y) * w + x];
  }
  size_t size() const { return v.size(); }
};

// RGB image, interleaved HWC float in [0, 1].
struct Image {
  int h = 0;
  int w = 0;
  std::vector<float> v;  // h * w * 3

  Image() = default;
  Image(int h_, int w_, float fill = 0.f)
      : h(h_), w(w_), v(size_t(h_) * w_ * 3, fill) {}

  float& at(int y, int x, int ch) { return v[(size_t(y) * w + x) * 3 + ch]; }
  const float& at(int y, int x, int ch) const {
    return v[(size_t(y) * w + x) * 3 + ch];
  }
  size_t size() const { return v.size(); }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w; }
};

}  // namespace partsdet

#endif
