#ifndef PARTSDET_METRICS_HPP
#define PARTSDET_METRICS_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "partsdet/errors.hpp"

namespace partsdet {

enum class Grouping { Frame, Video };

inline const char* grouping_name(Grouping g) {
  return g == Grouping::Frame ? "frame" : "video";
}

struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;  // 0 real, 1 fake
  Grouping grouping = Grouping::Frame;

  size_t size() const { return scores.size(); }
};

namespace detail {

inline void require_both_classes(const ScoreSet& s, const char* who) {
  if (s.scores.size() != s.labels.size())
    throw metric_error(std::string(who) + ": scores/labels length mismatch");
  size_t pos = 0;
  for (int l : s.labels) pos += size_t(l == 1);
  if (pos == 0 || pos == s.labels.size())
    throw metric_error(std::string(who) + ": need both classes");
}

}  // namespace detail

// ROC points swept over every distinct score threshold, from (0,0) to (1,1).
// A sample is predicted fake when score >= threshold.
inline std::vector<std::pair<double, double>> roc_curve(const ScoreSet& s) {
  detail::require_both_classes(s, "roc_curve");
  const size_t n = s.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return s.scores[a] > s.scores[b];
  });
  size_t n_fake = 0, n_real = 0;
  for (int l : s.labels) (l == 1 ? n_fake : n_real)++;

  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, 0.0);
  size_t tp = 0, fp = 0, i = 0;
  while (i < n) {
    const double thr = s.scores[order[i]];
    while (i < n && s.scores[order[i]] == thr) {
      (s.labels[order[i]] == 1 ? tp : fp)++;
      ++i;
    }
    pts.emplace_back(double(fp) / double(n_real), double(tp) / double(n_fake));
  }
  return pts;  // last point is (1,1)
}

// AUC by the pairwise (Mann-Whitney) definition: the fraction of
// (fake, real) pairs where the fake outscores the real, ties half-credited.
inline double auc(const ScoreSet& s) {
  detail::require_both_classes(s, "auc");
  const size_t n = s.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return s.scores[a] < s.scores[b];
  });

  // Walk tie groups in ascending score; count, per fake, twice the number of
  // strictly lower reals plus the tied reals. Integer arithmetic until the
  // final division.
  unsigned long long twice_u = 0, reals_below = 0;
  size_t n_fake = 0, n_real = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    size_t grp_fake = 0, grp_real = 0;
    const double v = s.scores[order[i]];
    while (j < n && s.scores[order[j]] == v) {
      (s.labels[order[j]] == 1 ? grp_fake : grp_real)++;
      ++j;
    }
    twice_u += grp_fake * (2ull * reals_below + grp_real);
    reals_below += grp_real;
    n_fake += grp_fake;
    n_real += grp_real;
    i = j;
  }
  return double(twice_u) / (2.0 * double(n_fake) * double(n_real));
}

// Mean of per-class accuracies at a fixed threshold (predicted fake when
// score > threshold).
inline double balanced_accuracy(const ScoreSet& s, double threshold = 0.5) {
  detail::require_both_classes(s, "balanced_accuracy");
  size_t tp = 0, tn = 0, n_fake = 0, n_real = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    const bool pred_fake = s.scores[i] > threshold;
    if (s.labels[i] == 1) {
      ++n_fake;
      tp += size_t(pred_fake);
    } else {
      ++n_real;
      tn += size_t(!pred_fake);
    }
  }
  return 0.5 * (double(tp) / double(n_fake) + double(tn) / double(n_real));
}

// Collapse frame scores to per-video scores (mean of frame scores).
inline ScoreSet group_by_video(const ScoreSet& frames,
                               const std::vector<std::string>& video_ids) {
  if (frames.size() != video_ids.size())
    throw metric_error("group_by_video: video id count mismatch");
  std::map<std::string, std::pair<double, size_t>> sums;  // sum, count
  std::map<std::string, int> label_of;
  for (size_t i = 0; i < frames.size(); ++i) {
    auto& e = sums[video_ids[i]];
    e.first += frames.scores[i];
    e.second += 1;
    auto it = label_of.find(video_ids[i]);
    if (it == label_of.end())
      label_of[video_ids[i]] = frames.labels[i];
    else if (it->second != frames.labels[i])
      throw metric_error("group_by_video: inconsistent labels in video " +
                         video_ids[i]);
  }
  ScoreSet out;
  out.grouping = Grouping::Video;
  for (const auto& [vid, e] : sums) {
    out.scores.push_back(e.first / double(e.second));
    out.labels.push_back(label_of[vid]);
  }
  return out;
}

}  // namespace partsdet

#endif
