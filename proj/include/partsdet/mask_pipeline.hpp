#ifndef PARTSDET_MASK_PIPELINE_HPP
#define PARTSDET_MASK_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "partsdet/blur.hpp"
#include "partsdet/errors.hpp"
#include "partsdet/morph.hpp"
#include "partsdet/raster.hpp"
#include "partsdet/regions.hpp"
#include "partsdet/resample.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

struct MaskParams {
  int dilate_iterations = 8;
  double sigma = 7.0;                // tuned for a 288x288 canvas
  double binarize_threshold = -1.0;  // < 0 keeps soft targets
};

struct RegionMask {
  RegionId region = RegionId::Nose;
  GridF values;
};

// One soft mask per region at a common resolution. An all-zero set is the
// training target for real images.
struct RegionMaskSet {
  int h = 0;
  int w = 0;
  std::array<GridF, kRegionCount> masks;

  const GridF& of(RegionId r) const { return masks[static_cast<int>(r)]; }
  GridF& of(RegionId r) { return masks[static_cast<int>(r)]; }
};

inline RegionMaskSet zero_mask_set(int h, int w) {
  RegionMaskSet s;
  s.h = h;
  s.w = w;
  for (int i = 0; i < kRegionCount; ++i) s.masks[i] = GridF(h, w, 0.f);
  return s;
}

inline bool mask_set_is_zero(const RegionMaskSet& s) {
  for (const GridF& g : s.masks)
    for (float v : g.v)
      if (v != 0.f) return false;
  return true;
}

// Full-resolution soft mask for one region: rasterize -> dilate -> blur.
// This (pre-downsample) mask is also what the forensic statistics use.
inline GridF build_region_mask_fullres(const std::vector<Point>& pts,
                                       RegionId region, int canvas_h,
                                       int canvas_w, const MaskParams& p) {
  const GridU8 hard = dilate(rasterize_region(pts, region, canvas_h, canvas_w),
                             p.dilate_iterations);
  return gaussian_blur(grid_cast<float>(hard), p.sigma);
}

inline void binarize_inplace(GridF& g, double threshold) {
  for (float& v : g.v) v = (v >= threshold) ? 1.f : 0.f;
}

// Full pipeline per region: rasterize -> dilate -> blur -> downsample,
// composed in that order. Pure function of its inputs.
inline RegionMaskSet build_region_masks(const LandmarkSet& landmarks,
                                        int canvas_h, int canvas_w,
                                        int target_h, int target_w,
                                        const MaskParams& params) {
  const auto groups = group_landmarks(landmarks);
  RegionMaskSet out;
  out.h = target_h;
  out.w = target_w;
  for (RegionId r : kAllRegions) {
    GridF full = build_region_mask_fullres(groups[static_cast<int>(r)], r,
                                           canvas_h, canvas_w, params);
    GridF down = downsample_mask(full, target_h, target_w);
    if (params.binarize_threshold >= 0)
      binarize_inplace(down, params.binarize_threshold);
    out.of(r) = std::move(down);
  }
  return out;
}

inline std::string mask_filename(const std::string& frame_id, RegionId r) {
  return frame_id + "_" + region_name(r) + ".png";
}

// --- Optional on-disk cache (FPF_CACHE_DIR) ---------------------------------
// Stores raw float32 grids so cached and recomputed masks are bit-identical.

namespace detail {

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull) {
  const uint8_t* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t mask_cache_key(const LandmarkSet& lm, int ch, int cw, int th,
                               int tw, const MaskParams& p) {
  uint64_t h = fnv1a(lm.data(), lm.size() * sizeof(Point));
  const double fields[7] = {double(ch), double(cw), double(th), double(tw),
                            double(p.dilate_iterations), p.sigma,
                            p.binarize_threshold};
  return fnv1a(fields, sizeof(fields), h);
}

}  // namespace detail

inline const char* mask_cache_dir() { return std::getenv("FPF_CACHE_DIR"); }

inline RegionMaskSet build_region_masks_cached(const LandmarkSet& landmarks,
                                               int canvas_h, int canvas_w,
                                               int target_h, int target_w,
                                               const MaskParams& params) {
  const char* dir = mask_cache_dir();
  if (!dir)
    return build_region_masks(landmarks, canvas_h, canvas_w, target_h,
                              target_w, params);

  const uint64_t key = detail::mask_cache_key(landmarks, canvas_h, canvas_w,
                                              target_h, target_w, params);
  std::filesystem::create_directories(dir);
  const std::string path =
      std::string(dir) + "/mask_" + std::to_string(key) + ".bin";
  const size_t grid_bytes = size_t(target_h) * target_w * sizeof(float);

  if (std::filesystem::exists(path)) {
    std::ifstream is(path, std::ios::binary);
    RegionMaskSet s = zero_mask_set(target_h, target_w);
    bool ok = bool(is);
    for (int i = 0; i < kRegionCount && ok; ++i)
      ok = bool(is.read(reinterpret_cast<char*>(s.masks[i].v.data()),
                        (std::streamsize)grid_bytes));
    if (ok) return s;
  }

  RegionMaskSet s = build_region_masks(landmarks, canvas_h, canvas_w, target_h,
                                       target_w, params);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    for (int i = 0; i < kRegionCount; ++i)
      os.write(reinterpret_cast<const char*>(s.masks[i].v.data()),
               (std::streamsize)grid_bytes);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  return s;
}

}  // namespace partsdet

#endif
