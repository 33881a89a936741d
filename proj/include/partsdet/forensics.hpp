#ifndef PARTSDET_FORENSICS_HPP
#define PARTSDET_FORENSICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "partsdet/errors.hpp"
#include "partsdet/image_ops.hpp"
#include "partsdet/manifest.hpp"
#include "partsdet/mask_pipeline.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

struct DiffMap {
  RegionId region = RegionId::Nose;
  GridF values;  // mask-weighted absolute differences, in [0,1]
  std::string real_id;
  std::string fake_id;
};

// D = mask * mean_channels |real - fake|. Channels are averaged to one
// scalar per pixel before masking.
inline DiffMap diff_map(const Image& real, const Image& fake,
                        const GridF& mask, RegionId region) {
  if (!real.same_shape(fake)) throw input_error("diff_map: image shapes differ");
  if (mask.h != real.h || mask.w != real.w)
    throw input_error("diff_map: mask shape mismatch");
  DiffMap d;
  d.region = region;
  d.values = GridF(real.h, real.w);
  for (int y = 0; y < real.h; ++y)
    for (int x = 0; x < real.w; ++x) {
      float acc = 0;
      for (int c = 0; c < 3; ++c)
        acc += std::abs(real.at(y, x, c) - fake.at(y, x, c));
      d.values.at(y, x) = mask.at(y, x) * (acc / 3.f);
    }
  return d;
}

struct RegionHistogram {
  RegionId region = RegionId::Nose;
  int bins = 50;
  double lo = 0.0, hi = 1.0;  // uniform edges over [0,1]
  std::vector<int64_t> counts;

  int64_t total() const {
    int64_t t = 0;
    for (int64_t c : counts) t += c;
    return t;
  }
};

struct DiffStatsOptions {
  MaskParams mask_params;
  int bins = 50;
  int frames_per_video = 1;  // one frame per video, as the analysis protocol
  bool hard_count = false;   // mean denominator: pixel count vs mask mass
  int crop_size = 288;
};

struct FramePair {
  const FrameRecord* fake = nullptr;
  const FrameRecord* real = nullptr;
};

// Fake frames with resolvable paired reals, at most frames_per_video per
// fake video (frames ordered by frame_id).
inline std::vector<FramePair> collect_pairs(const DatasetManifest& m,
                                            int frames_per_video) {
  std::map<std::string, std::vector<const FrameRecord*>> per_video;
  for (const FrameRecord& r : m.records)
    if (r.label == 1 && !r.paired_real_frame_id.empty())
      per_video[r.video_id].push_back(&r);

  std::vector<FramePair> pairs;
  for (auto& [vid, frames] : per_video) {
    std::sort(frames.begin(), frames.end(),
              [](const FrameRecord* a, const FrameRecord* b) {
                return a->frame_id < b->frame_id;
              });
    const int take = frames_per_video <= 0
                         ? int(frames.size())
                         : std::min<int>(frames_per_video, int(frames.size()));
    for (int i = 0; i < take; ++i) {
      const FrameRecord* real = m.find(frames[i]->paired_real_frame_id);
      if (!real)
        throw data_error("unresolvable paired_real_frame_id for frame " +
                         frames[i]->frame_id);
      pairs.push_back({frames[i], real});
    }
  }
  return pairs;
}

namespace detail {

// Both images are cropped with the manipulated frame's box so the pair stays
// pixel-aligned; masks come from the manipulated frame's landmarks at full
// crop resolution (post-blur, pre-downsample).
struct LoadedPair {
  Image real, fake;
  std::array<GridF, kRegionCount> masks;
};

inline LoadedPair load_pair(const DatasetManifest& m, const FramePair& p,
                            const DiffStatsOptions& opt) {
  LoadedPair lp;
  const Image real_frame = read_image(resolve_image_path(m, *p.real));
  const Image fake_frame = read_image(resolve_image_path(m, *p.fake));
  lp.real = crop_and_resize(real_frame, p.fake->box, opt.crop_size);
  lp.fake = crop_and_resize(fake_frame, p.fake->box, opt.crop_size);

  LandmarkSet lm = p.fake->landmarks;
  if (opt.crop_size != 288) {
    const double s = opt.crop_size / 288.0;
    for (Point& pt : lm) {
      pt.x *= s;
      pt.y *= s;
    }
  }
  const auto groups = group_landmarks(lm);
  for (RegionId r : kAllRegions)
    lp.masks[int(r)] =
        build_region_mask_fullres(groups[int(r)], r, opt.crop_size,
                                  opt.crop_size, opt.mask_params);
  return lp;
}

}  // namespace detail

inline RegionHistogram region_histogram(const DatasetManifest& m,
                                        RegionId region,
                                        const DiffStatsOptions& opt) {
  RegionHistogram h;
  h.region = region;
  h.bins = opt.bins;
  h.counts.assign(opt.bins, 0);
  const auto pairs = collect_pairs(m, opt.frames_per_video);
  for (const FramePair& p : pairs) {
    const auto lp = detail::load_pair(m, p, opt);
    const DiffMap d = diff_map(lp.fake, lp.real, lp.masks[int(region)], region);
    for (size_t i = 0; i < d.values.v.size(); ++i) {
      if (lp.masks[int(region)].v[i] <= 0.f) continue;
      const double v = d.values.v[i];
      int bin = int(v * opt.bins);
      if (bin >= opt.bins) bin = opt.bins - 1;
      if (bin < 0) bin = 0;
      ++h.counts[bin];
    }
  }
  return h;
}

struct DiffSummaryRow {
  std::string method;
  RegionId region = RegionId::Nose;
  double mean_abs_diff = 0;
  int64_t n_pixels = 0;
};

struct DiffSummary {
  std::vector<DiffSummaryRow> rows;  // method-major, region order within

  double value(const std::string& method, RegionId r) const {
    for (const auto& row : rows)
      if (row.method == method && row.region == r) return row.mean_abs_diff;
    throw data_error("diff summary: no cell for " + method);
  }
};

// Per (method, region) masked mean of the absolute pixel difference. The
// default denominator is the soft mask mass; hard_count divides by the
// number of contributing pixels instead.
inline DiffSummary diff_summary(const DatasetManifest& m,
                                const DiffStatsOptions& opt) {
  struct Acc {
    double num = 0, mass = 0;
    int64_t n = 0;
  };
  std::map<std::string, std::array<Acc, kRegionCount>> per_method;

  const auto pairs = collect_pairs(m, opt.frames_per_video);
  for (const FramePair& p : pairs) {
    const auto lp = detail::load_pair(m, p, opt);
    auto& accs = per_method[p.fake->method];
    for (RegionId r : kAllRegions) {
      const GridF& mask = lp.masks[int(r)];
      const DiffMap d = diff_map(lp.fake, lp.real, mask, r);
      Acc& a = accs[int(r)];
      for (size_t i = 0; i < mask.v.size(); ++i) {
        if (mask.v[i] <= 0.f) continue;
        a.num += d.values.v[i];
        a.mass += mask.v[i];
        ++a.n;
      }
    }
  }

  DiffSummary out;
  for (const auto& [method, accs] : per_method) {
    for (RegionId r : kAllRegions) {
      const Acc& a = accs[int(r)];
      DiffSummaryRow row;
      row.method = method;
      row.region = r;
      const double den = opt.hard_count ? double(a.n) : a.mass;
      row.mean_abs_diff = den > 0 ? a.num / den : 0.0;
      row.n_pixels = a.n;
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

inline std::string diff_summary_csv(const DiffSummary& s) {
  std::ostringstream os;
  os << "method,region,mean_abs_diff,n_pixels\n";
  for (const auto& r : s.rows) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", r.mean_abs_diff);
    os << r.method << ',' << region_name(r.region) << ',' << buf << ','
       << r.n_pixels << '\n';
  }
  return os.str();
}

inline std::string diff_summary_markdown(const DiffSummary& s) {
  std::vector<std::string> methods;
  for (const auto& r : s.rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
  std::ostringstream os;
  os << "| Method | Nose | Mouth | Eyes | Chin |\n|---|---|---|---|---|\n";
  for (const auto& m : methods) {
    os << "| " << m << " |";
    for (RegionId r : kAllRegions) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", s.value(m, r));
      os << ' ' << buf << " |";
    }
    os << '\n';
  }
  return os.str();
}

inline std::string histograms_csv(const std::vector<RegionHistogram>& hs) {
  std::ostringstream os;
  os << "region,bin_lo,bin_hi,count\n";
  for (const auto& h : hs) {
    for (int i = 0; i < h.bins; ++i) {
      char lo[32], hi[32];
      std::snprintf(lo, sizeof(lo), "%.6f", h.lo + (h.hi - h.lo) * i / h.bins);
      std::snprintf(hi, sizeof(hi), "%.6f",
                    h.lo + (h.hi - h.lo) * (i + 1) / h.bins);
      os << region_name(h.region) << ',' << lo << ',' << hi << ','
         << h.counts[i] << '\n';
    }
  }
  return os.str();
}

}  // namespace partsdet

#endif
