#ifndef PARTSDET_BATCH_HPP
#define PARTSDET_BATCH_HPP

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "partsdet/errors.hpp"
#include "partsdet/image_ops.hpp"
#include "partsdet/manifest.hpp"
#include "partsdet/mask_pipeline.hpp"
#include "partsdet/rng.hpp"

namespace partsdet {

enum class BatchPolicy { Balanced, AsIs };

struct BatchOptions {
  int size = 128;
  BatchPolicy policy = BatchPolicy::Balanced;
  int input_size = 288;
  int map_h = 18;
  int map_w = 18;
  int jpeg_quality = 95;  // 0 disables the JPEG round-trip
  MaskParams mask_params;
  Split split = Split::Train;
};

struct Batch {
  std::vector<std::string> frame_ids;
  std::vector<std::string> video_ids;
  std::vector<Image> images;            // input_size^2 x 3, in [0,1]
  std::vector<int> labels;              // 0 real, 1 fake
  std::vector<RegionMaskSet> mask_sets; // all-zero for real images

  size_t size() const { return images.size(); }
};

// Per-run cache of normalized images and mask sets. Both are pure functions
// of (record, options), so a cache hit is bit-identical to a recompute.
class FrameCache {
 public:
  explicit FrameCache(size_t max_image_bytes = size_t(512) << 20)
      : max_bytes_(max_image_bytes) {}

  std::shared_ptr<const Image> image(const std::string& key) {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = images_.find(key);
    return it == images_.end() ? nullptr : it->second;
  }

  void put_image(const std::string& key, std::shared_ptr<const Image> img) {
    std::lock_guard<std::mutex> lk(mu_);
    const size_t bytes = img->v.size() * sizeof(float);
    if (used_ + bytes > max_bytes_) return;  // full: skip, never evict
    if (images_.emplace(key, std::move(img)).second) used_ += bytes;
  }

  std::shared_ptr<const RegionMaskSet> masks(const std::string& key) {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = masks_.find(key);
    return it == masks_.end() ? nullptr : it->second;
  }

  void put_masks(const std::string& key,
                 std::shared_ptr<const RegionMaskSet> m) {
    std::lock_guard<std::mutex> lk(mu_);
    masks_.emplace(key, std::move(m));
  }

 private:
  std::mutex mu_;
  size_t max_bytes_;
  size_t used_ = 0;
  std::unordered_map<std::string, std::shared_ptr<const Image>> images_;
  std::unordered_map<std::string, std::shared_ptr<const RegionMaskSet>> masks_;
};

// Landmarks live in the normalized 288x288 crop space; rescale when the
// model input differs.
inline LandmarkSet scale_landmarks(const LandmarkSet& lm, int input_size) {
  if (input_size == 288) return lm;
  const double s = input_size / 288.0;
  LandmarkSet out = lm;
  for (Point& p : out) {
    p.x *= s;
    p.y *= s;
  }
  return out;
}

// Load one record through the full input pipeline:
// read -> crop/resize -> JPEG round-trip -> [0,1] floats.
inline Image load_normalized_image(const DatasetManifest& m,
                                   const FrameRecord& r,
                                   const BatchOptions& opt,
                                   FrameCache* cache = nullptr) {
  if (cache) {
    if (auto hit = cache->image(r.frame_id)) return *hit;
  }
  Image frame = read_image(resolve_image_path(m, r));
  Image img = crop_and_resize(frame, r.box, opt.input_size);
  if (opt.jpeg_quality > 0) img = jpeg_roundtrip(img, opt.jpeg_quality);
  if (cache) cache->put_image(r.frame_id, std::make_shared<Image>(img));
  return img;
}

inline RegionMaskSet masks_for_record(const FrameRecord& r,
                                      const BatchOptions& opt,
                                      FrameCache* cache = nullptr) {
  if (r.label == 0) return zero_mask_set(opt.map_h, opt.map_w);
  if (cache) {
    if (auto hit = cache->masks(r.frame_id)) return *hit;
  }
  RegionMaskSet s = build_region_masks_cached(
      scale_landmarks(r.landmarks, opt.input_size), opt.input_size,
      opt.input_size, opt.map_h, opt.map_w, opt.mask_params);
  if (cache) cache->put_masks(r.frame_id, std::make_shared<RegionMaskSet>(s));
  return s;
}

// Balanced policy: ceil(size/2) fakes and floor(size/2) reals drawn
// uniformly without replacement (clamped to pool sizes).
inline Batch make_batch(const DatasetManifest& m, const BatchOptions& opt,
                        Rng& rng, FrameCache* cache = nullptr) {
  if (m.records.empty()) throw batch_error("make_batch: empty manifest");
  if (opt.size <= 0) throw batch_error("make_batch: size must be > 0");

  std::vector<size_t> pool = select_records(m, opt.split);
  if (pool.empty())
    throw batch_error(std::string("make_batch: no records in split ") +
                      split_name(opt.split));

  std::vector<size_t> chosen;
  if (opt.policy == BatchPolicy::AsIs) {
    std::vector<size_t> shuffled = pool;
    rng.shuffle(shuffled);
    chosen.assign(shuffled.begin(),
                  shuffled.begin() + std::min<size_t>(opt.size, shuffled.size()));
  } else {
    std::vector<size_t> reals, fakes;
    for (size_t i : pool)
      (m.records[i].label == 0 ? reals : fakes).push_back(i);
    if (reals.empty())
      throw batch_error("make_batch: balanced policy needs real frames");
    if (fakes.empty())
      throw batch_error("make_batch: balanced policy needs fake frames");
    const size_t want_fake = (size_t(opt.size) + 1) / 2;
    const size_t want_real = size_t(opt.size) / 2;
    rng.shuffle(fakes);
    rng.shuffle(reals);
    for (size_t i = 0; i < std::min(want_fake, fakes.size()); ++i)
      chosen.push_back(fakes[i]);
    for (size_t i = 0; i < std::min(want_real, reals.size()); ++i)
      chosen.push_back(reals[i]);
  }

  Batch b;
  for (size_t idx : chosen) {
    const FrameRecord& r = m.records[idx];
    b.frame_ids.push_back(r.frame_id);
    b.video_ids.push_back(r.video_id);
    b.images.push_back(load_normalized_image(m, r, opt, cache));
    b.labels.push_back(r.label);
    b.mask_sets.push_back(masks_for_record(r, opt, cache));
  }
  return b;
}

inline Batch make_batch(const DatasetManifest& m, const BatchOptions& opt,
                        uint64_t seed, FrameCache* cache = nullptr) {
  Rng rng(seed);
  return make_batch(m, opt, rng, cache);
}

}  // namespace partsdet

#endif
