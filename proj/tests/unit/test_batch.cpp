#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "partsdet/batch.hpp"
#include "partsdet/synth.hpp"

using namespace partsdet;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path dir;
  DatasetManifest manifest;

  explicit Fixture(uint64_t seed, int n_videos = 5) {
    SynthConfig cfg;
    cfg.n_videos = n_videos;
    cfg.frames_per_video = 2;
    cfg.artifact_regions = {RegionId::Mouth};
    cfg.seed = seed;
    cfg.train_fraction = 1.0;  // everything in train for batching tests
    cfg.val_fraction = 0.0;
    dir = fs::temp_directory_path() / ("pd_batch_" + std::to_string(seed));
    fs::remove_all(dir);
    manifest = synth_generate(cfg, dir.string());
  }
  ~Fixture() { fs::remove_all(dir); }
};

BatchOptions small_opts() {
  BatchOptions opt;
  opt.size = 4;
  opt.input_size = 96;
  opt.map_h = 6;
  opt.map_w = 6;
  opt.mask_params.dilate_iterations = 3;
  opt.mask_params.sigma = 7.0 * 96 / 288;
  return opt;
}

}  // namespace

TEST_CASE("balanced batches split evenly between classes") {
  Fixture fx(11);
  const Batch b = make_batch(fx.manifest, small_opts(), uint64_t(3));
  REQUIRE(b.size() == 4);
  int fakes = 0;
  for (int l : b.labels) fakes += l;
  REQUIRE(fakes == 2);
  for (const Image& img : b.images) {
    REQUIRE(img.h == 96);
    REQUIRE(img.w == 96);
    for (float v : img.v) {
      REQUIRE(v >= 0.f);
      REQUIRE(v <= 1.f);
    }
  }
}

TEST_CASE("balanced batches clamp to the smaller class pool") {
  // 1 real video x 2 frames -> only 2 reals available
  Fixture fx(12, 1);
  BatchOptions opt = small_opts();
  opt.size = 6;
  const Batch b = make_batch(fx.manifest, opt, uint64_t(1));
  int fakes = 0, reals = 0;
  for (int l : b.labels) (l ? fakes : reals)++;
  REQUIRE(reals == 2);
  REQUIRE(fakes == 2);  // ceil(6/2)=3 requested, 2 available
}

TEST_CASE("real frames get exactly-zero mask sets, fakes their own masks") {
  Fixture fx(13);
  const Batch b = make_batch(fx.manifest, small_opts(), uint64_t(5));
  for (size_t i = 0; i < b.size(); ++i) {
    if (b.labels[i] == 0) {
      REQUIRE(mask_set_is_zero(b.mask_sets[i]));
    } else {
      REQUIRE(!mask_set_is_zero(b.mask_sets[i]));
      REQUIRE(b.mask_sets[i].h == 6);
      REQUIRE(b.mask_sets[i].w == 6);
      // masks must come from this sample's own landmarks
      const FrameRecord* r = fx.manifest.find(b.frame_ids[i]);
      const RegionMaskSet expect = build_region_masks(
          scale_landmarks(r->landmarks, 96), 96, 96, 6, 6,
          small_opts().mask_params);
      for (int k = 0; k < kRegionCount; ++k)
        REQUIRE(b.mask_sets[i].masks[k].v == expect.masks[k].v);
    }
  }
}

TEST_CASE("fixed seed reproduces the batch bit for bit") {
  Fixture fx(14);
  const Batch a = make_batch(fx.manifest, small_opts(), uint64_t(21));
  const Batch b = make_batch(fx.manifest, small_opts(), uint64_t(21));
  REQUIRE(a.frame_ids == b.frame_ids);
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.images[i].v == b.images[i].v);
    for (int k = 0; k < kRegionCount; ++k)
      REQUIRE(a.mask_sets[i].masks[k].v == b.mask_sets[i].masks[k].v);
  }
  const Batch c = make_batch(fx.manifest, small_opts(), uint64_t(22));
  REQUIRE(a.frame_ids != c.frame_ids);
}

TEST_CASE("balanced policy without reals fails") {
  Fixture fx(15);
  DatasetManifest fakes_only = fx.manifest;
  fakes_only.records.erase(
      std::remove_if(fakes_only.records.begin(), fakes_only.records.end(),
                     [](const FrameRecord& r) { return r.label == 0; }),
      fakes_only.records.end());
  fakes_only.rebuild_index();
  REQUIRE_THROWS_AS(make_batch(fakes_only, small_opts(), uint64_t(1)),
                    batch_error);
}

TEST_CASE("as-is policy samples from the whole split") {
  Fixture fx(16);
  BatchOptions opt = small_opts();
  opt.policy = BatchPolicy::AsIs;
  opt.size = 8;
  const Batch b = make_batch(fx.manifest, opt, uint64_t(2));
  REQUIRE(b.size() == 8);
}

TEST_CASE("frame cache returns bit-identical data") {
  Fixture fx(17);
  FrameCache cache;
  const Batch a = make_batch(fx.manifest, small_opts(), uint64_t(9), &cache);
  const Batch b = make_batch(fx.manifest, small_opts(), uint64_t(9), &cache);
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.images[i].v == b.images[i].v);
    for (int k = 0; k < kRegionCount; ++k)
      REQUIRE(a.mask_sets[i].masks[k].v == b.mask_sets[i].masks[k].v);
  }
}
