#ifndef PARTSDET_EVALUATE_HPP
#define PARTSDET_EVALUATE_HPP

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "partsdet/batch.hpp"
#include "partsdet/errors.hpp"
#include "partsdet/manifest.hpp"
#include "partsdet/metrics.hpp"
#include "partsdet/model.hpp"
#include "partsdet/objectives.hpp"

namespace partsdet {

struct EvalOptions {
  Split split = Split::Test;
  int jpeg_quality = 95;
  int jobs = 0;  // 0 = hardware concurrency
};

struct FrameScore {
  std::string frame_id;
  std::string video_id;
  int label = 0;
  double score = 0;
};

inline int effective_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : int(hc);
}

// Score every frame of the chosen split. Scores are logistic(yhat); frames
// are processed independently so the result is identical for any job count.
inline std::vector<FrameScore> evaluate_frames(const Model<float>& model,
                                               const DatasetManifest& manifest,
                                               const EvalOptions& opt) {
  const std::vector<size_t> idx = select_records(manifest, opt.split);
  if (idx.empty()) throw metric_error("evaluate: no frames in split");

  BatchOptions bopt;
  bopt.input_size = model.config.input_size;
  bopt.jpeg_quality = opt.jpeg_quality;

  std::vector<FrameScore> out(idx.size());
  const int jobs = effective_jobs(opt.jobs);
  std::vector<std::thread> workers;
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;

  const auto [w, b] = classifier_weights(model);
  auto run = [&, w = w, b = b]() {
    try {
      SampleCache<float> ws;  // reused activation buffers
      for (;;) {
        const size_t k = next.fetch_add(1);
        if (k >= idx.size()) break;
        const FrameRecord& r = manifest.records[idx[k]];
        const Image img = load_normalized_image(manifest, r, bopt);
        const auto maps = forward_sample(model, img, &ws);
        const Prediction<float> pred =
            classify<float>(maps, model.config.agg, w, b);
        out[k] = {r.frame_id, r.video_id, r.label, double(pred.score)};
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mu);
      if (!first_error) first_error = std::current_exception();
    }
  };
  if (jobs <= 1) {
    run();
  } else {
    for (int t = 0; t < jobs; ++t) workers.emplace_back(run);
    for (auto& t : workers) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

inline ScoreSet to_scoreset(const std::vector<FrameScore>& frames,
                            Grouping grouping) {
  ScoreSet s;
  s.grouping = Grouping::Frame;
  std::vector<std::string> vids;
  for (const auto& f : frames) {
    s.scores.push_back(f.score);
    s.labels.push_back(f.label);
    vids.push_back(f.video_id);
  }
  if (grouping == Grouping::Video) return group_by_video(s, vids);
  return s;
}

inline ScoreSet evaluate(const Model<float>& model,
                         const DatasetManifest& manifest, Grouping grouping,
                         const EvalOptions& opt = {}) {
  return to_scoreset(evaluate_frames(model, manifest, opt), grouping);
}

// --- Transfer report ---------------------------------------------------------

struct TransferCell {
  std::string train_split;
  std::string eval_split;
  std::string model_name;
  std::string grouping;
  double auc = 0;
  double balanced_accuracy = 0;
  size_t n_videos = 0;
  size_t n_frames = 0;
  bool in_distribution = false;
};

struct TransferReport {
  std::vector<TransferCell> cells;
};

namespace detail {

inline int split_rank(const std::string& s) {
  static const std::vector<std::string> canon = {"DF", "F2F", "FS", "NT"};
  for (size_t i = 0; i < canon.size(); ++i)
    if (s == canon[i]) return int(i);
  return 100;
}

inline int model_rank(const std::string& s) {
  static const std::vector<std::string> canon = {"Nose",      "Mouth",
                                                 "Eyes",      "Chin",
                                                 "Eyes+Chin", "Combined"};
  for (size_t i = 0; i < canon.size(); ++i)
    if (s == canon[i]) return int(i);
  return 100;
}

inline bool cell_order(const TransferCell& a, const TransferCell& b) {
  const auto ka = std::make_tuple(a.grouping, model_rank(a.model_name),
                                  a.model_name, split_rank(a.train_split),
                                  a.train_split, split_rank(a.eval_split),
                                  a.eval_split);
  const auto kb = std::make_tuple(b.grouping, model_rank(b.model_name),
                                  b.model_name, split_rank(b.train_split),
                                  b.train_split, split_rank(b.eval_split),
                                  b.eval_split);
  return ka < kb;
}

}  // namespace detail

// Full grid: every checkpoint evaluated on every manifest, both groupings.
inline TransferReport transfer_matrix(
    const std::map<std::string, const Model<float>*>& models,
    const std::map<std::string, const DatasetManifest*>& manifests,
    const EvalOptions& opt = {}) {
  if (models.empty() || manifests.empty())
    throw metric_error("transfer_matrix: empty inputs");
  TransferReport rep;
  for (const auto& [train_name, model] : models) {
    for (const auto& [eval_name, manifest] : manifests) {
      const auto frames = evaluate_frames(*model, *manifest, opt);
      for (Grouping g : {Grouping::Video, Grouping::Frame}) {
        const ScoreSet s = to_scoreset(frames, g);
        TransferCell c;
        c.train_split = train_name;
        c.eval_split = eval_name;
        c.model_name = model->config.model_name();
        c.grouping = grouping_name(g);
        c.auc = auc(s);
        c.balanced_accuracy = balanced_accuracy(s);
        c.n_frames = frames.size();
        c.n_videos = to_scoreset(frames, Grouping::Video).size();
        c.in_distribution = train_name == eval_name;
        rep.cells.push_back(std::move(c));
      }
    }
  }
  std::sort(rep.cells.begin(), rep.cells.end(), detail::cell_order);
  return rep;
}

inline std::string render_report_csv(const TransferReport& rep) {
  std::ostringstream os;
  os << "train_split,eval_split,model_name,grouping,auc,balanced_accuracy,"
        "n_videos,n_frames,in_distribution\n";
  for (const TransferCell& c : rep.cells) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f", c.auc, c.balanced_accuracy);
    os << c.train_split << ',' << c.eval_split << ',' << c.model_name << ','
       << c.grouping << ',' << buf << ',' << c.n_videos << ',' << c.n_frames
       << ',' << (c.in_distribution ? 1 : 0) << '\n';
  }
  return os.str();
}

inline TransferReport parse_report_csv(const std::string& text) {
  TransferReport rep;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[9];
    for (int i = 0; i < 9; ++i) std::getline(ls, f[i], ',');
    TransferCell c;
    c.train_split = f[0];
    c.eval_split = f[1];
    c.model_name = f[2];
    c.grouping = f[3];
    c.auc = std::stod(f[4]);
    c.balanced_accuracy = std::stod(f[5]);
    c.n_videos = std::stoul(f[6]);
    c.n_frames = std::stoul(f[7]);
    c.in_distribution = f[8] == "1";
    rep.cells.push_back(std::move(c));
  }
  return rep;
}

// Markdown grid per (grouping, metric): rows = trained model, columns =
// evaluation split; in-distribution cells are wrapped in parentheses.
inline std::string render_report_markdown(const TransferReport& rep) {
  std::ostringstream os;
  for (const std::string grouping : {"video", "frame"}) {
    for (const std::string metric : {"auc", "balanced_accuracy"}) {
      std::vector<const TransferCell*> cells;
      std::vector<std::string> evals;
      std::vector<std::pair<std::string, std::string>> rows;  // model, train
      for (const TransferCell& c : rep.cells) {
        if (c.grouping != grouping) continue;
        cells.push_back(&c);
        if (std::find(evals.begin(), evals.end(), c.eval_split) == evals.end())
          evals.push_back(c.eval_split);
        const auto row = std::make_pair(c.model_name, c.train_split);
        if (std::find(rows.begin(), rows.end(), row) == rows.end())
          rows.push_back(row);
      }
      if (cells.empty()) continue;
      os << "### " << metric << " (" << grouping << "-level)\n\n";
      os << "| Model | Train |";
      for (const auto& e : evals) os << ' ' << e << " |";
      os << "\n|---|---|";
      for (size_t i = 0; i < evals.size(); ++i) os << "---|";
      os << '\n';
      for (const auto& [model, train] : rows) {
        os << "| " << model << " | " << train << " |";
        for (const auto& e : evals) {
          const TransferCell* found = nullptr;
          for (const TransferCell* c : cells)
            if (c->model_name == model && c->train_split == train &&
                c->eval_split == e)
              found = c;
          if (!found) {
            os << " - |";
            continue;
          }
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.3f",
                        metric == "auc" ? found->auc
                                        : found->balanced_accuracy);
          if (found->in_distribution)
            os << " (" << buf << ") |";
          else
            os << ' ' << buf << " |";
        }
        os << '\n';
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace partsdet

#endif
