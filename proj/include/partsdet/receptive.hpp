#ifndef PARTSDET_RECEPTIVE_HPP
#define PARTSDET_RECEPTIVE_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "partsdet/errors.hpp"
#include "partsdet/layers.hpp"
#include "partsdet/model.hpp"

namespace partsdet {

// Receptive-field measurement. The gradient of a trained net understates the
// true support wherever a ReLU is dead or a pooling window routes around a
// pixel, so the measurement runs a backward pass over a positivized copy of
// the weights (|w| + eps) in which ReLUs pass through and max pooling
// distributes to its whole window. Every connected input then receives a
// strictly positive contribution: the measured support equals the exact set
// of pixels that can influence the chosen map cell.

namespace influence {

template <typename T>
std::vector<T> abs_eps(const std::vector<T>& w, T eps = T(1e-3)) {
  std::vector<T> a(w.size());
  for (size_t i = 0; i < w.size(); ++i) a[i] = std::abs(w[i]) + eps;
  return a;
}

template <typename T>
Chw<T> conv2d(const Chw<T>& dout, const std::vector<T>& w, int oc, int ic,
              int in_h, int in_w, int kh, int kw, int stride, int pad) {
  Chw<T> zeros_in(ic, in_h, in_w, T(0));
  std::vector<T> dw(w.size(), T(0));
  std::vector<T> db;
  Chw<T> din;
  conv2d_bwd(zeros_in, abs_eps(w), dout, kh, kw, stride, pad, dw, db, din);
  (void)oc;
  return din;
}

template <typename T>
Chw<T> dw3x3(const Chw<T>& dout, const std::vector<T>& w) {
  Chw<T> zeros_in(dout.c, dout.h, dout.w, T(0));
  std::vector<T> dwg(w.size(), T(0));
  Chw<T> din;
  dw3x3_bwd(zeros_in, abs_eps(w), dout, dwg, din);
  return din;
}

template <typename T>
Chw<T> pw(const Chw<T>& dout, const std::vector<T>& w, int ic) {
  Chw<T> zeros_in(ic, dout.h, dout.w, T(0));
  std::vector<T> dwg(w.size(), T(0));
  std::vector<T> db;
  Chw<T> din;
  pw_bwd(zeros_in, abs_eps(w), dout, dwg, db, din);
  return din;
}

// Max pooling 3x3 s2 p1 with the window fully connected.
template <typename T>
Chw<T> pool(const Chw<T>& dout, int in_h, int in_w) {
  Chw<T> din(dout.c, in_h, in_w, T(0));
  for (int ch = 0; ch < dout.c; ++ch) {
    const T* dop = dout.plane(ch);
    T* dip = din.plane(ch);
    for (int y = 0; y < dout.h; ++y)
      for (int x = 0; x < dout.w; ++x) {
        const T g = dop[size_t(y) * dout.w + x];
        if (g == T(0)) continue;
        for (int ky = -1; ky <= 1; ++ky) {
          const int iy = y * 2 + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = -1; kx <= 1; ++kx) {
            const int ix = x * 2 + kx;
            if (ix < 0 || ix >= in_w) continue;
            dip[size_t(iy) * in_w + ix] += g;
          }
        }
      }
  }
  return din;
}

}  // namespace influence

struct ReceptiveField {
  int h = 0, w = 0;          // support extent in input pixels
  int y0 = 0, y1 = -1;       // support bounding box (inclusive)
  int x0 = 0, x1 = -1;
};

namespace detail {

template <typename T>
Chw<T> block_influence(const ParamStore<T>& ps, const std::string& prefix,
                       const Chw<T>& dout, int in_c, int in_h, int in_w) {
  using namespace influence;
  // The separable convs preserve spatial size, so the pool input matches
  // the block input spatially.
  Chw<T> d = pool(dout, in_h, in_w);
  d = pw(d, ps.vec(prefix + "/sep2/pw"),
         int(ps.at(prefix + "/sep2/pb").shape[0]));
  d = dw3x3(d, ps.vec(prefix + "/sep2/dw"));
  d = pw(d, ps.vec(prefix + "/sep1/pw"), in_c);
  d = dw3x3(d, ps.vec(prefix + "/sep1/dw"));
  // skip: 1x1 stride-2 conv from the block input
  Chw<T> dskip = conv2d(dout, ps.vec(prefix + "/skip/w"),
                        int(ps.at(prefix + "/skip/b").shape[0]), in_c, in_h,
                        in_w, 1, 1, 2, 0);
  add_inplace(d, dskip);
  return d;
}

}  // namespace detail

// Empirical support of the chosen map cell's derivative with respect to the
// input, measured on the positivized network. cell -1 selects the center.
template <typename T>
ReceptiveField receptive_field(const Model<T>& model, int part_index = 0,
                               int cell_y = -1, int cell_x = -1) {
  using namespace influence;
  const ModelConfig& cfg = model.config;
  if (part_index < 0 || part_index >= int(cfg.parts.size()))
    throw input_error("receptive_field: bad part index");
  const auto layouts = subnet_layouts(cfg);
  // Locate the subnet and local part slot serving this part.
  size_t subnet = 0, local = 0, seen = 0;
  for (size_t s = 0; s < layouts.size(); ++s)
    for (size_t p = 0; p < layouts[s].parts.size(); ++p, ++seen)
      if (int(seen) == part_index) {
        subnet = s;
        local = p;
      }
  const SubnetLayout& sn = layouts[subnet];
  const std::string rn = region_name(sn.parts[local]);
  const ParamStore<T>& ps = model.params;

  const int S = cfg.input_size;
  const int mr = cfg.map_resolution();
  if (cell_y < 0) cell_y = mr / 2;
  if (cell_x < 0) cell_x = mr / 2;

  Chw<T> d(1, mr, mr, T(0));
  d.at(0, cell_y, cell_x) = T(1);

  // head 1x1
  const int c4 = cfg.c_block2();
  d = pw(d, ps.vec(sn.prefix + "head/" + rn + "/w"), c4);

  // branch blocks, deepest first; spatial size doubles walking back
  int sz = mr;
  for (int k = cfg.extra_blocks; k >= 1; --k) {
    d = detail::block_influence(
        ps, sn.prefix + "branch/" + rn + "/block" + std::to_string(k), d, c4,
        sz * 2, sz * 2);
    sz *= 2;
  }
  d = detail::block_influence(ps, sn.prefix + "trunk/block2", d,
                              cfg.c_block1(), sz * 2, sz * 2);
  sz *= 2;
  d = detail::block_influence(ps, sn.prefix + "trunk/block1", d,
                              cfg.c_stem2(), sz * 2, sz * 2);
  sz *= 2;
  d = conv2d(d, ps.vec(sn.prefix + "trunk/stem2/w"), cfg.c_stem2(),
             cfg.c_stem1(), sz, sz, 3, 3, 1, 1);
  d = conv2d(d, ps.vec(sn.prefix + "trunk/stem1/w"), cfg.c_stem1(), 3, S, S, 3,
             3, 2, 1);

  ReceptiveField rf;
  rf.y0 = S;
  rf.x0 = S;
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      T mass = 0;
      for (int c = 0; c < 3; ++c) mass += std::abs(d.at(c, y, x));
      if (mass > T(0)) {
        rf.y0 = std::min(rf.y0, y);
        rf.y1 = std::max(rf.y1, y);
        rf.x0 = std::min(rf.x0, x);
        rf.x1 = std::max(rf.x1, x);
      }
    }
  if (rf.y1 >= rf.y0) {
    rf.h = rf.y1 - rf.y0 + 1;
    rf.w = rf.x1 - rf.x0 + 1;
  }
  return rf;
}

}  // namespace partsdet

#endif
