#ifndef PARTSDET_SAMPLING_HPP
#define PARTSDET_SAMPLING_HPP

#include <string>
#include <vector>

#include "partsdet/errors.hpp"
#include "partsdet/rng.hpp"

namespace partsdet {

// Draw min(n, available) frame ids uniformly without replacement,
// deterministic given the seed. An empty video yields an empty list.
inline std::vector<std::string> sample_frames(
    const std::vector<std::string>& video_frame_ids, int n, uint64_t seed) {
  if (n < 1) throw invalid_parameter_error("sample_frames: n must be >= 1");
  std::vector<std::string> ids = video_frame_ids;
  Rng rng(seed);
  const size_t k = std::min<size_t>(n, ids.size());
  // Partial Fisher-Yates: the first k entries are the sample.
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + (size_t)rng.uniform_int(ids.size() - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  return ids;
}

}  // namespace partsdet

#endif
