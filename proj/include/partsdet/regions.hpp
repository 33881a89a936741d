#ifndef PARTSDET_REGIONS_HPP
#define PARTSDET_REGIONS_HPP

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "partsdet/errors.hpp"

namespace partsdet {

// Stable ordering; every place that stacks parts uses this order.
enum class RegionId : int { Nose = 0, Mouth = 1, Eyes = 2, Chin = 3 };

constexpr int kRegionCount = 4;
constexpr std::array<RegionId, kRegionCount> kAllRegions = {
    RegionId::Nose, RegionId::Mouth, RegionId::Eyes, RegionId::Chin};

inline const char* region_name(RegionId r) {
  switch (r) {
    case RegionId::Nose: return "nose";
    case RegionId::Mouth: return "mouth";
    case RegionId::Eyes: return "eyes";
    case RegionId::Chin: return "chin";
  }
  return "?";
}

inline RegionId region_from_name(const std::string& s) {
  for (RegionId r : kAllRegions)
    if (s == region_name(r)) return r;
  throw invalid_parameter_error("unknown region: " + s);
}

struct Point {
  double x = 0;
  double y = 0;
};

// 68-point landmark convention: jaw 0-16, eyebrows 17-26, nose 27-35,
// eyes 36-47, mouth 48-67.
constexpr int kLandmarkCount = 68;

using LandmarkSet = std::vector<Point>;

inline void validate_landmarks(const LandmarkSet& lm) {
  if (lm.size() != kLandmarkCount)
    throw invalid_landmarks_error("expected 68 landmarks, got " +
                                  std::to_string(lm.size()));
  for (const Point& p : lm)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw invalid_landmarks_error("non-finite landmark coordinate");
}

// Index ranges per region; eyebrows (17-26) are unused.
inline std::pair<int, int> region_index_range(RegionId r) {
  switch (r) {
    case RegionId::Chin: return {0, 17};
    case RegionId::Nose: return {27, 36};
    case RegionId::Eyes: return {36, 48};
    case RegionId::Mouth: return {48, 68};
  }
  return {0, 0};
}

inline std::array<std::vector<Point>, kRegionCount> group_landmarks(
    const LandmarkSet& lm) {
  validate_landmarks(lm);
  std::array<std::vector<Point>, kRegionCount> groups;
  for (RegionId r : kAllRegions) {
    auto [lo, hi] = region_index_range(r);
    auto& g = groups[static_cast<int>(r)];
    g.reserve(hi - lo);
    for (int i = lo; i < hi; ++i) g.push_back(lm[i]);
  }
  return groups;
}

}  // namespace partsdet

#endif
