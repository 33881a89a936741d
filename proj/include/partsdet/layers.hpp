#ifndef PARTSDET_LAYERS_HPP
#define PARTSDET_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "partsdet/errors.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

namespace detail {

// Strict FP forbids auto-vectorizing a single-accumulator reduction;
// four independent streams fix the evaluation order and vectorize.
template <typename T>
T dot_reduce(const T* __restrict a, const T* __restrict b, size_t n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  size_t p = 0;
  for (; p + 4 <= n; p += 4) {
    s0 += a[p] * b[p];
    s1 += a[p + 1] * b[p + 1];
    s2 += a[p + 2] * b[p + 2];
    s3 += a[p + 3] * b[p + 3];
  }
  for (; p < n; ++p) s0 += a[p] * b[p];
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
T sum_reduce(const T* __restrict a, size_t n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  size_t p = 0;
  for (; p + 4 <= n; p += 4) {
    s0 += a[p];
    s1 += a[p + 1];
    s2 += a[p + 2];
    s3 += a[p + 3];
  }
  for (; p < n; ++p) s0 += a[p];
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
void axpy(T scale, const T* __restrict src, T* __restrict dst, size_t n) {
  for (size_t p = 0; p < n; ++p) dst[p] += scale * src[p];
}


// One input/output plane pair of a 3x3 convolution, pad 1. Interior columns
// skip the bounds checks so the inner loops stay vectorizable.
template <typename T>
void conv3x3_acc_plane(const T* ip, int ih, int iw, const T* wp, T* op,
                       int oh, int ow, int stride) {
  for (int y = 0; y < oh; ++y) {
    const int iy = y * stride - 1;
    const T* r0 = iy >= 0 ? ip + size_t(iy) * iw : nullptr;
    const T* r1 = iy + 1 < ih ? ip + size_t(iy + 1) * iw : nullptr;
    const T* r2 = iy + 2 < ih ? ip + size_t(iy + 2) * iw : nullptr;
    T* orow = op + size_t(y) * ow;

    const int x_lo = 1;  // first x with ix >= 0 (ix = x*stride - 1)
    const int x_hi = std::min(ow, iw >= 2 ? (iw - 2) / stride + 1 : 0);
    auto edge = [&](int x) {
      const int ix = x * stride - 1;
      T acc = 0;
      for (int kx = 0; kx < 3; ++kx) {
        const int c = ix + kx;
        if (c < 0 || c >= iw) continue;
        if (r0) acc += wp[kx] * r0[c];
        if (r1) acc += wp[3 + kx] * r1[c];
        if (r2) acc += wp[6 + kx] * r2[c];
      }
      orow[x] += acc;
    };
    for (int x = 0; x < std::min(x_lo, ow); ++x) edge(x);
    if (r0 && r1 && r2) {
      for (int x = x_lo; x < x_hi; ++x) {
        const int ix = x * stride - 1;
        orow[x] += wp[0] * r0[ix] + wp[1] * r0[ix + 1] + wp[2] * r0[ix + 2] +
                   wp[3] * r1[ix] + wp[4] * r1[ix + 1] + wp[5] * r1[ix + 2] +
                   wp[6] * r2[ix] + wp[7] * r2[ix + 1] + wp[8] * r2[ix + 2];
      }
    } else {
      for (int x = x_lo; x < x_hi; ++x) {
        const int ix = x * stride - 1;
        T acc = 0;
        if (r0) acc += wp[0] * r0[ix] + wp[1] * r0[ix + 1] + wp[2] * r0[ix + 2];
        if (r1) acc += wp[3] * r1[ix] + wp[4] * r1[ix + 1] + wp[5] * r1[ix + 2];
        if (r2) acc += wp[6] * r2[ix] + wp[7] * r2[ix + 1] + wp[8] * r2[ix + 2];
        orow[x] += acc;
      }
    }
    for (int x = std::max(x_hi, x_lo); x < ow; ++x) edge(x);
  }
}

// Backward of the same plane pair: input gradient scatter plus weight
// gradient taps, bounds-checked only at the borders.
template <typename T>
void conv3x3_bwd_plane(const T* ip, T* dip, int ih, int iw, const T* wp,
                       T* dwp, const T* dop, int oh, int ow, int stride) {
  for (int y = 0; y < oh; ++y) {
    const int iy = y * stride - 1;
    const T* i0 = iy >= 0 ? ip + size_t(iy) * iw : nullptr;
    const T* i1 = iy + 1 < ih ? ip + size_t(iy + 1) * iw : nullptr;
    const T* i2 = iy + 2 < ih ? ip + size_t(iy + 2) * iw : nullptr;
    T* d0 = iy >= 0 ? dip + size_t(iy) * iw : nullptr;
    T* d1 = iy + 1 < ih ? dip + size_t(iy + 1) * iw : nullptr;
    T* d2 = iy + 2 < ih ? dip + size_t(iy + 2) * iw : nullptr;
    const T* drow = dop + size_t(y) * ow;

    const int x_lo = 1;  // first x with ix >= 0 (ix = x*stride - 1)
    const int x_hi = std::min(ow, iw >= 2 ? (iw - 2) / stride + 1 : 0);
    auto edge = [&](int x) {
      const T g = drow[x];
      if (g == T(0)) return;
      const int ix = x * stride - 1;
      for (int kx = 0; kx < 3; ++kx) {
        const int c = ix + kx;
        if (c < 0 || c >= iw) continue;
        if (i0) { dwp[kx] += g * i0[c]; d0[c] += g * wp[kx]; }
        if (i1) { dwp[3 + kx] += g * i1[c]; d1[c] += g * wp[3 + kx]; }
        if (i2) { dwp[6 + kx] += g * i2[c]; d2[c] += g * wp[6 + kx]; }
      }
    };
    for (int x = 0; x < std::min(x_lo, ow); ++x) edge(x);
    if (i0 && i1 && i2) {
      // weight-gradient taps accumulate in registers; the scatter into the
      // input gradient stays in the loop
      T a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0,
        a8 = 0;
      const T w0 = wp[0], w1 = wp[1], w2 = wp[2], w3 = wp[3], w4 = wp[4],
              w5 = wp[5], w6 = wp[6], w7 = wp[7], w8 = wp[8];
      for (int x = x_lo; x < x_hi; ++x) {
        const T g = drow[x];
        const int ix = x * stride - 1;
        a0 += g * i0[ix]; a1 += g * i0[ix + 1]; a2 += g * i0[ix + 2];
        a3 += g * i1[ix]; a4 += g * i1[ix + 1]; a5 += g * i1[ix + 2];
        a6 += g * i2[ix]; a7 += g * i2[ix + 1]; a8 += g * i2[ix + 2];
        d0[ix] += g * w0; d0[ix + 1] += g * w1; d0[ix + 2] += g * w2;
        d1[ix] += g * w3; d1[ix + 1] += g * w4; d1[ix + 2] += g * w5;
        d2[ix] += g * w6; d2[ix + 1] += g * w7; d2[ix + 2] += g * w8;
      }
      dwp[0] += a0; dwp[1] += a1; dwp[2] += a2;
      dwp[3] += a3; dwp[4] += a4; dwp[5] += a5;
      dwp[6] += a6; dwp[7] += a7; dwp[8] += a8;
    } else {
      for (int x = x_lo; x < x_hi; ++x) edge(x);
    }
    for (int x = std::max(x_hi, x_lo); x < ow; ++x) edge(x);
  }
}

}  // namespace detail

// Plain 2-D convolution, zero padding. Weights are (oc, ic, kh, kw).
// 3x3/pad-1 and 1x1/pad-0 take fast paths; other shapes use the generic
// tap loop.
template <typename T>
Chw<T> conv2d_fwd(const Chw<T>& in, const std::vector<T>& w,
                  const std::vector<T>& b, int oc, int kh, int kw, int stride,
                  int pad) {
  const int ic = in.c;
  const int oh = (in.h + 2 * pad - kh) / stride + 1;
  const int ow = (in.w + 2 * pad - kw) / stride + 1;
  Chw<T> out(oc, oh, ow);

  if (kh == 3 && kw == 3 && pad == 1 && in.h >= 2 && in.w >= 3) {
    for (int o = 0; o < oc; ++o) {
      T* op = out.plane(o);
      const T bias = b.empty() ? T(0) : b[o];
      for (size_t p = 0; p < size_t(oh) * ow; ++p) op[p] = bias;
      for (int i = 0; i < ic; ++i)
        detail::conv3x3_acc_plane(in.plane(i), in.h, in.w,
                                  &w[(size_t(o) * ic + i) * 9], op, oh, ow,
                                  stride);
    }
    return out;
  }
  if (kh == 1 && kw == 1 && pad == 0) {
    for (int o = 0; o < oc; ++o) {
      T* op = out.plane(o);
      const T bias = b.empty() ? T(0) : b[o];
      for (size_t p = 0; p < size_t(oh) * ow; ++p) op[p] = bias;
      for (int i = 0; i < ic; ++i) {
        const T wv = w[size_t(o) * ic + i];
        const T* ip = in.plane(i);
        for (int y = 0; y < oh; ++y) {
          const T* irow = ip + size_t(y) * stride * in.w;
          T* orow = op + size_t(y) * ow;
          for (int x = 0; x < ow; ++x) orow[x] += wv * irow[size_t(x) * stride];
        }
      }
    }
    return out;
  }

  for (int o = 0; o < oc; ++o) {
    T* op = out.plane(o);
    const T bias = b.empty() ? T(0) : b[o];
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        T acc = bias;
        const int iy0 = y * stride - pad;
        const int ix0 = x * stride - pad;
        for (int i = 0; i < ic; ++i) {
          const T* ip = in.plane(i);
          const T* wp = &w[((size_t(o) * ic + i) * kh) * kw];
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= in.h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ix0 + kx;
              if (ix < 0 || ix >= in.w) continue;
              acc += wp[ky * kw + kx] * ip[size_t(iy) * in.w + ix];
            }
          }
        }
        op[size_t(y) * ow + x] = acc;
      }
    }
  }
  return out;
}

template <typename T>
void conv2d_bwd(const Chw<T>& in, const std::vector<T>& w, const Chw<T>& dout,
                int kh, int kw, int stride, int pad, std::vector<T>& dw,
                std::vector<T>& db, Chw<T>& din) {
  const int ic = in.c, oc = dout.c;
  const size_t on = size_t(dout.h) * dout.w;
  din = Chw<T>(in.c, in.h, in.w, T(0));

  if (!db.empty())
    for (int o = 0; o < oc; ++o) db[o] += detail::sum_reduce(dout.plane(o), on);

  if (kh == 3 && kw == 3 && pad == 1 && in.h >= 2 && in.w >= 3) {
    for (int o = 0; o < oc; ++o)
      for (int i = 0; i < ic; ++i)
        detail::conv3x3_bwd_plane(in.plane(i), din.plane(i), in.h, in.w,
                                  &w[(size_t(o) * ic + i) * 9],
                                  &dw[(size_t(o) * ic + i) * 9],
                                  dout.plane(o), dout.h, dout.w, stride);
    return;
  }
  if (kh == 1 && kw == 1 && pad == 0) {
    for (int o = 0; o < oc; ++o) {
      const T* dop = dout.plane(o);
      for (int i = 0; i < ic; ++i) {
        const T* ip = in.plane(i);
        T* dip = din.plane(i);
        const T wv = w[size_t(o) * ic + i];
        if (stride == 1) {
          dw[size_t(o) * ic + i] += detail::dot_reduce(dop, ip, on);
          detail::axpy(wv, dop, dip, on);
          continue;
        }
        T acc = 0;
        for (int y = 0; y < dout.h; ++y) {
          const T* irow = ip + size_t(y) * stride * in.w;
          T* drow_in = dip + size_t(y) * stride * in.w;
          const T* drow = dop + size_t(y) * dout.w;
          for (int x = 0; x < dout.w; ++x) {
            acc += drow[x] * irow[size_t(x) * stride];
            drow_in[size_t(x) * stride] += wv * drow[x];
          }
        }
        dw[size_t(o) * ic + i] += acc;
      }
    }
    return;
  }

  for (int o = 0; o < oc; ++o) {
    const T* dop = dout.plane(o);
    for (int y = 0; y < dout.h; ++y) {
      for (int x = 0; x < dout.w; ++x) {
        const T g = dop[size_t(y) * dout.w + x];
        const int iy0 = y * stride - pad;
        const int ix0 = x * stride - pad;
        for (int i = 0; i < ic; ++i) {
          const T* ip = in.plane(i);
          T* dip = din.plane(i);
          T* dwp = &dw[((size_t(o) * ic + i) * kh) * kw];
          const T* wp = &w[((size_t(o) * ic + i) * kh) * kw];
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= in.h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ix0 + kx;
              if (ix < 0 || ix >= in.w) continue;
              dwp[ky * kw + kx] += g * ip[size_t(iy) * in.w + ix];
              dip[size_t(iy) * in.w + ix] += g * wp[ky * kw + kx];
            }
          }
        }
      }
    }
  }
}

// Depthwise 3x3, stride 1, pad 1, no bias. Weights are (c, 3, 3).
template <typename T>
Chw<T> dw3x3_fwd(const Chw<T>& in, const std::vector<T>& w) {
  Chw<T> out(in.c, in.h, in.w);
  for (int ch = 0; ch < in.c; ++ch)
    detail::conv3x3_acc_plane(in.plane(ch), in.h, in.w, &w[size_t(ch) * 9],
                              out.plane(ch), in.h, in.w, 1);
  return out;
}

template <typename T>
void dw3x3_bwd(const Chw<T>& in, const std::vector<T>& w, const Chw<T>& dout,
               std::vector<T>& dw, Chw<T>& din) {
  din = Chw<T>(in.c, in.h, in.w, T(0));
  for (int ch = 0; ch < in.c; ++ch)
    detail::conv3x3_bwd_plane(in.plane(ch), din.plane(ch), in.h, in.w,
                              &w[size_t(ch) * 9], &dw[size_t(ch) * 9],
                              dout.plane(ch), dout.h, dout.w, 1);
}

// Pointwise 1x1 convolution. Weights are (oc, ic), bias (oc).
template <typename T>
Chw<T> pw_fwd(const Chw<T>& in, const std::vector<T>& w,
              const std::vector<T>& b, int oc) {
  const int ic = in.c;
  const size_t n = size_t(in.h) * in.w;
  Chw<T> out(oc, in.h, in.w);
  for (int o = 0; o < oc; ++o) {
    T* op = out.plane(o);
    const T bias = b.empty() ? T(0) : b[o];
    for (size_t p = 0; p < n; ++p) op[p] = bias;
    for (int i = 0; i < ic; ++i) {
      const T wv = w[size_t(o) * ic + i];
      const T* ip = in.plane(i);
      for (size_t p = 0; p < n; ++p) op[p] += wv * ip[p];
    }
  }
  return out;
}

template <typename T>
void pw_bwd(const Chw<T>& in, const std::vector<T>& w, const Chw<T>& dout,
            std::vector<T>& dw, std::vector<T>& db, Chw<T>& din) {
  const int ic = in.c, oc = dout.c;
  const size_t n = size_t(in.h) * in.w;
  din = Chw<T>(in.c, in.h, in.w, T(0));
  for (int o = 0; o < oc; ++o) {
    const T* dop = dout.plane(o);
    if (!db.empty()) db[o] += detail::sum_reduce(dop, n);
    for (int i = 0; i < ic; ++i) {
      dw[size_t(o) * ic + i] += detail::dot_reduce(dop, in.plane(i), n);
      detail::axpy(w[size_t(o) * ic + i], dop, din.plane(i), n);
    }
  }
}

template <typename T>
Chw<T> relu_fwd(const Chw<T>& in) {
  Chw<T> out = in;
  for (T& v : out.v) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Chw<T> relu_bwd(const Chw<T>& in, const Chw<T>& dout) {
  Chw<T> din = dout;
  for (size_t i = 0; i < in.v.size(); ++i)
    if (in.v[i] <= T(0)) din.v[i] = T(0);
  return din;
}

// Max pooling 3x3, stride 2, pad 1 (out-of-bounds cells ignored).
// argmax records the flat input index that won each window.
template <typename T>
Chw<T> maxpool3x3s2_fwd(const Chw<T>& in, std::vector<int>& argmax) {
  const int oh = (in.h + 2 - 3) / 2 + 1;
  const int ow = (in.w + 2 - 3) / 2 + 1;
  Chw<T> out(in.c, oh, ow);
  argmax.assign(size_t(in.c) * oh * ow, -1);
  for (int ch = 0; ch < in.c; ++ch) {
    const T* ip = in.plane(ch);
    T* op = out.plane(ch);
    int* ap = &argmax[size_t(ch) * oh * ow];
    for (int y = 0; y < oh; ++y) {
      const int y0 = std::max(0, y * 2 - 1), y1 = std::min(in.h - 1, y * 2 + 1);
      for (int x = 0; x < ow; ++x) {
        const int x0 = std::max(0, x * 2 - 1), x1 = std::min(in.w - 1, x * 2 + 1);
        T best = -std::numeric_limits<T>::infinity();
        int best_idx = -1;
        for (int iy = y0; iy <= y1; ++iy)
          for (int ix = x0; ix <= x1; ++ix) {
            const T v = ip[size_t(iy) * in.w + ix];
            if (v > best) {
              best = v;
              best_idx = iy * in.w + ix;
            }
          }
        op[size_t(y) * ow + x] = best;
        ap[size_t(y) * ow + x] = best_idx;
      }
    }
  }
  return out;
}

template <typename T>
Chw<T> maxpool3x3s2_bwd(const Chw<T>& dout, const std::vector<int>& argmax,
                        int in_c, int in_h, int in_w) {
  Chw<T> din(in_c, in_h, in_w, T(0));
  const size_t plane = size_t(dout.h) * dout.w;
  for (int ch = 0; ch < in_c; ++ch) {
    const T* dop = dout.plane(ch);
    T* dip = din.plane(ch);
    const int* ap = &argmax[size_t(ch) * plane];
    for (size_t p = 0; p < plane; ++p)
      if (ap[p] >= 0) dip[ap[p]] += dop[p];
  }
  return din;
}

template <typename T>
void add_inplace(Chw<T>& a, const Chw<T>& b) {
  for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

}  // namespace partsdet

#endif
