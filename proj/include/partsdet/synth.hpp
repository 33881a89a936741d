#ifndef PARTSDET_SYNTH_HPP
#define PARTSDET_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "partsdet/blur.hpp"
#include "partsdet/errors.hpp"
#include "partsdet/image_io.hpp"
#include "partsdet/manifest.hpp"
#include "partsdet/raster.hpp"
#include "partsdet/regions.hpp"
#include "partsdet/rng.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

enum class ArtifactKind { Noise, Blur, Colorshift };

inline const char* artifact_kind_name(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::Noise: return "noise";
    case ArtifactKind::Blur: return "blur";
    case ArtifactKind::Colorshift: return "colorshift";
  }
  return "?";
}

inline ArtifactKind artifact_kind_from_name(const std::string& s) {
  if (s == "noise") return ArtifactKind::Noise;
  if (s == "blur") return ArtifactKind::Blur;
  if (s == "colorshift") return ArtifactKind::Colorshift;
  throw invalid_parameter_error("unknown artifact kind: " + s);
}

struct SynthConfig {
  int n_videos = 200;  // real videos; each gets a fake counterpart
  int frames_per_video = 4;
  std::vector<RegionId> artifact_regions;
  ArtifactKind artifact_kind = ArtifactKind::Colorshift;
  double amplitude = 0.2;
  double train_fraction = 0.7;
  double val_fraction = 0.15;
  uint64_t seed = 0;
  std::string dataset_name = "synthetic";
};

// Procedural face template in the 288x288 crop space, dlib 68-point layout.
inline LandmarkSet synth_template_landmarks() {
  LandmarkSet lm(kLandmarkCount);
  const double cx = 144;
  // Jaw 0-16: arc through the chin.
  for (int i = 0; i <= 16; ++i) {
    const double phi = (170.0 - 10.0 * i) * 3.14159265358979323846 / 180.0;
    lm[i] = {cx + 82.0 * std::cos(phi), 130.0 + 122.0 * std::sin(phi)};
  }
  // Eyebrows 17-26.
  for (int i = 0; i < 5; ++i) {
    const double t = i / 4.0;
    lm[17 + i] = {92.0 + 36.0 * t, 98.0 - 6.0 * std::sin(t * 3.14159)};
    lm[22 + i] = {160.0 + 36.0 * t, 98.0 - 6.0 * std::sin(t * 3.14159)};
  }
  // Nose 27-35: bridge then base.
  for (int i = 0; i < 4; ++i) lm[27 + i] = {cx, 120.0 + 13.0 * i};
  const double base_x[5] = {126, 135, 144, 153, 162};
  const double base_y[5] = {172, 175, 177, 175, 172};
  for (int i = 0; i < 5; ++i) lm[31 + i] = {base_x[i], base_y[i]};
  // Eyes 36-47: two hexagons.
  const double ex[6] = {-16, -10, 4, 14, 4, -10};
  const double ey[6] = {0, -6, -6, 0, 6, 6};
  for (int i = 0; i < 6; ++i) lm[36 + i] = {108.0 + ex[i], 118.0 + ey[i]};
  for (int i = 0; i < 6; ++i) lm[42 + i] = {180.0 + ex[i], 118.0 + ey[i]};
  // Mouth 48-67: outer ring of 12, inner ring of 8.
  for (int i = 0; i < 12; ++i) {
    const double a = 2.0 * 3.14159265358979323846 * i / 12.0;
    lm[48 + i] = {cx + 34.0 * std::cos(a), 210.0 + 16.0 * std::sin(a)};
  }
  for (int i = 0; i < 8; ++i) {
    const double a = 2.0 * 3.14159265358979323846 * i / 8.0;
    lm[60 + i] = {cx + 24.0 * std::cos(a), 210.0 + 8.0 * std::sin(a)};
  }
  return lm;
}

// Iris centers of the template (test fixture for the eye grouping).
inline std::pair<Point, Point> synth_template_eye_centers() {
  return {{108.0, 118.0}, {180.0, 118.0}};
}

namespace detail {

struct Affine {
  double a = 1, b = 0, tx = 0;
  double c = 0, d = 1, ty = 0;

  Point apply(const Point& p) const {
    return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty};
  }
};

inline Affine jitter_affine(Rng& rng, double max_scale_dev, double max_rot,
                            double max_shift) {
  const double s = 1.0 + rng.uniform(-max_scale_dev, max_scale_dev);
  const double th = rng.uniform(-max_rot, max_rot);
  const double tx = rng.uniform(-max_shift, max_shift);
  const double ty = rng.uniform(-max_shift, max_shift);
  const double cx = 144, cy = 144;
  Affine f;
  f.a = s * std::cos(th);
  f.b = -s * std::sin(th);
  f.c = s * std::sin(th);
  f.d = s * std::cos(th);
  // rotate/scale about the crop center, then shift
  f.tx = cx - (f.a * cx + f.b * cy) + tx;
  f.ty = cy - (f.c * cx + f.d * cy) + ty;
  return f;
}

inline LandmarkSet apply_affine(const LandmarkSet& lm, const Affine& f) {
  LandmarkSet out = lm;
  for (Point& p : out) p = f.apply(p);
  return out;
}

inline void fill_mask_rgb(Image& img, const GridU8& mask, float r, float g,
                          float b) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      if (mask.at(y, x)) {
        img.at(y, x, 0) = r;
        img.at(y, x, 1) = g;
        img.at(y, x, 2) = b;
      }
}

inline void draw_disc(Image& img, double cx, double cy, double rad, float r,
                      float g, float b) {
  const int x0 = std::max(0, (int)std::floor(cx - rad));
  const int x1 = std::min(img.w - 1, (int)std::ceil(cx + rad));
  const int y0 = std::max(0, (int)std::floor(cy - rad));
  const int y1 = std::min(img.h - 1, (int)std::ceil(cy + rad));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= rad * rad) {
        img.at(y, x, 0) = r;
        img.at(y, x, 1) = g;
        img.at(y, x, 2) = b;
      }
}

inline std::vector<Point> slice(const LandmarkSet& lm, int lo, int hi) {
  return std::vector<Point>(lm.begin() + lo, lm.begin() + hi);
}

inline Point centroid(const std::vector<Point>& pts) {
  Point c{0, 0};
  for (const Point& p : pts) {
    c.x += p.x;
    c.y += p.y;
  }
  c.x /= double(pts.size());
  c.y /= double(pts.size());
  return c;
}

// Render one frame from its landmarks. Colors are per-video; the texture
// noise is per-frame so consecutive frames differ like video frames do.
inline Image render_face(const LandmarkSet& lm, const Affine& head,
                         const std::array<float, 3>& bg,
                         const std::array<float, 3>& skin, Rng& noise_rng,
                         double noise_amp) {
  const int S = 288;
  Image img(S, S);
  for (int y = 0; y < S; ++y) {
    const float shade = 1.f - 0.15f * float(y) / S;  // soft gradient
    for (int x = 0; x < S; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = bg[c] * shade;
  }

  // Head: transformed ellipse, filled via its sampled hull.
  std::vector<Point> head_pts;
  for (int i = 0; i < 24; ++i) {
    const double a = 2.0 * 3.14159265358979323846 * i / 24.0;
    head_pts.push_back(
        head.apply({144.0 + 92.0 * std::cos(a), 146.0 + 128.0 * std::sin(a)}));
  }
  fill_mask_rgb(img, rasterize_hull(head_pts, S, S), skin[0], skin[1],
                skin[2]);

  // Eyes: white hulls with dark irises.
  for (int e = 0; e < 2; ++e) {
    const auto eye = slice(lm, 36 + 6 * e, 42 + 6 * e);
    fill_mask_rgb(img, rasterize_hull(eye, S, S), 0.95f, 0.95f, 0.93f);
    const Point c = centroid(eye);
    draw_disc(img, c.x, c.y, 4.0, 0.15f, 0.1f, 0.08f);
  }
  // Brows and nose as dark strokes.
  const float dk = 0.25f;
  for (auto& part : {slice(lm, 17, 22), slice(lm, 22, 27), slice(lm, 27, 31),
                     slice(lm, 31, 36)}) {
    const GridU8 stroke = rasterize_polyline(part, S, S);
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x)
        if (stroke.at(y, x)) {
          img.at(y, x, 0) = skin[0] * dk;
          img.at(y, x, 1) = skin[1] * dk;
          img.at(y, x, 2) = skin[2] * dk;
        }
  }
  // Mouth: outer lip fill, darker inner.
  fill_mask_rgb(img, rasterize_hull(slice(lm, 48, 60), S, S), 0.62f, 0.25f,
                0.24f);
  fill_mask_rgb(img, rasterize_hull(slice(lm, 60, 68), S, S), 0.42f, 0.14f,
                0.14f);
  // Jaw shadow line.
  const GridU8 jaw = rasterize_polyline(slice(lm, 0, 17), S, S);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x)
      if (jaw.at(y, x))
        for (int c = 0; c < 3; ++c) img.at(y, x, c) *= 0.6f;

  for (float& v : img.v) {
    v += float(noise_amp * (2.0 * noise_rng.uniform01() - 1.0));
    v = std::clamp(v, 0.f, 1.f);
  }
  return img;
}

// Union of the pre-dilation raster footprints of the artifact regions.
inline GridU8 artifact_footprint(const LandmarkSet& lm,
                                 const std::vector<RegionId>& regions) {
  GridU8 fp(288, 288, 0);
  const auto groups = group_landmarks(lm);
  for (RegionId r : regions) {
    const GridU8 g = rasterize_region(groups[static_cast<int>(r)], r, 288, 288);
    for (size_t i = 0; i < fp.v.size(); ++i) fp.v[i] |= g.v[i];
  }
  return fp;
}

inline Image apply_artifact(const Image& real, const GridU8& footprint,
                            ArtifactKind kind, double amplitude,
                            Rng& artifact_rng) {
  Image fake = real;
  switch (kind) {
    case ArtifactKind::Noise:
      for (int y = 0; y < real.h; ++y)
        for (int x = 0; x < real.w; ++x)
          if (footprint.at(y, x))
            for (int c = 0; c < 3; ++c)
              fake.at(y, x, c) = std::clamp(
                  real.at(y, x, c) +
                      float(amplitude *
                            (2.0 * artifact_rng.uniform01() - 1.0)),
                  0.f, 1.f);
      break;
    case ArtifactKind::Blur: {
      GridF chan(real.h, real.w);
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < real.h; ++y)
          for (int x = 0; x < real.w; ++x) chan.at(y, x) = real.at(y, x, c);
        const GridF blurred = gaussian_blur(chan, 1.0 + 10.0 * amplitude);
        for (int y = 0; y < real.h; ++y)
          for (int x = 0; x < real.w; ++x)
            if (footprint.at(y, x)) fake.at(y, x, c) = blurred.at(y, x);
      }
      break;
    }
    case ArtifactKind::Colorshift:
      for (int y = 0; y < real.h; ++y)
        for (int x = 0; x < real.w; ++x)
          if (footprint.at(y, x)) {
            fake.at(y, x, 0) =
                std::clamp(real.at(y, x, 0) + float(amplitude), 0.f, 1.f);
            fake.at(y, x, 1) = std::clamp(
                real.at(y, x, 1) - float(0.5 * amplitude), 0.f, 1.f);
            fake.at(y, x, 2) = std::clamp(
                real.at(y, x, 2) - float(0.25 * amplitude), 0.f, 1.f);
          }
      break;
  }
  return fake;
}

}  // namespace detail

// Fraction of the |fake - real| difference mass inside the footprint.
inline double artifact_mass_inside(const Image& real, const Image& fake,
                                   const GridU8& footprint) {
  double inside = 0, total = 0;
  for (int y = 0; y < real.h; ++y)
    for (int x = 0; x < real.w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double d = std::abs(double(real.at(y, x, c)) - fake.at(y, x, c));
        total += d;
        if (footprint.at(y, x)) inside += d;
      }
  return total == 0 ? 1.0 : inside / total;
}

// Generate a paired real/fake dataset on disk: out_dir/images/*.png and
// out_dir/manifest.jsonl. Byte-identical for identical (config, seed).
inline DatasetManifest synth_generate(const SynthConfig& cfg,
                                      const std::string& out_dir) {
  if (!(cfg.amplitude > 0))
    throw invalid_parameter_error("synth_generate: amplitude must be > 0");
  if (cfg.artifact_regions.empty())
    throw config_error("synth_generate: artifact_regions must be non-empty");
  if (cfg.n_videos < 1 || cfg.frames_per_video < 1)
    throw invalid_parameter_error("synth_generate: need >= 1 videos/frames");

  const std::filesystem::path root(out_dir);
  std::filesystem::create_directories(root / "images");

  DatasetManifest m;
  m.dataset = cfg.dataset_name;
  m.seed = cfg.seed;
  m.methods = {"real", "synth"};
  m.base_dir = root.string();

  const LandmarkSet tmpl = synth_template_landmarks();
  char buf[64];

  for (int v = 0; v < cfg.n_videos; ++v) {
    Rng vrng(derive_seed(cfg.seed, uint64_t(v)));
    const detail::Affine vjit = detail::jitter_affine(vrng, 0.08, 0.06, 8.0);
    const std::array<float, 3> bg = {float(vrng.uniform(0.25, 0.55)),
                                     float(vrng.uniform(0.3, 0.6)),
                                     float(vrng.uniform(0.35, 0.65))};
    const std::array<float, 3> skin = {float(vrng.uniform(0.65, 0.85)),
                                       float(vrng.uniform(0.5, 0.68)),
                                       float(vrng.uniform(0.4, 0.55))};
    const double frac = (v + 0.5) / cfg.n_videos;
    const Split split = frac < cfg.train_fraction ? Split::Train
                        : frac < cfg.train_fraction + cfg.val_fraction
                            ? Split::Val
                            : Split::Test;

    std::snprintf(buf, sizeof(buf), "v%04d", v);
    const std::string real_vid = std::string(buf) + "_real";
    const std::string fake_vid = std::string(buf) + "_fake";

    for (int f = 0; f < cfg.frames_per_video; ++f) {
      const detail::Affine fjit = detail::jitter_affine(vrng, 0.01, 0.01, 2.0);
      detail::Affine comp;  // frame jitter after video jitter
      comp.a = fjit.a * vjit.a + fjit.b * vjit.c;
      comp.b = fjit.a * vjit.b + fjit.b * vjit.d;
      comp.c = fjit.c * vjit.a + fjit.d * vjit.c;
      comp.d = fjit.c * vjit.b + fjit.d * vjit.d;
      comp.tx = fjit.a * vjit.tx + fjit.b * vjit.ty + fjit.tx;
      comp.ty = fjit.c * vjit.tx + fjit.d * vjit.ty + fjit.ty;

      const LandmarkSet lm = detail::apply_affine(tmpl, comp);
      const Image real =
          detail::render_face(lm, comp, bg, skin, vrng, 0.015);
      const GridU8 fp = detail::artifact_footprint(lm, cfg.artifact_regions);
      const Image fake = detail::apply_artifact(real, fp, cfg.artifact_kind,
                                                cfg.amplitude, vrng);

      const std::string real_id = real_vid + "_f" + std::to_string(f);
      const std::string fake_id = fake_vid + "_f" + std::to_string(f);
      write_image_png((root / "images" / (real_id + ".png")).string(), real);
      write_image_png((root / "images" / (fake_id + ".png")).string(), fake);

      FrameRecord rr;
      rr.frame_id = real_id;
      rr.video_id = real_vid;
      rr.split = split;
      rr.method = "real";
      rr.label = 0;
      rr.image_path = "images/" + real_id + ".png";
      rr.landmarks = lm;
      rr.box = {0, 0, 288, 288};
      m.records.push_back(rr);

      FrameRecord fr = rr;
      fr.frame_id = fake_id;
      fr.video_id = fake_vid;
      fr.method = "synth";
      fr.label = 1;
      fr.image_path = "images/" + fake_id + ".png";
      fr.paired_real_frame_id = real_id;
      m.records.push_back(fr);
    }
  }
  m.rebuild_index();
  write_manifest((root / "manifest.jsonl").string(), m);
  return m;
}

}  // namespace partsdet

#endif
