#ifndef PARTSDET_MANIFEST_HPP
#define PARTSDET_MANIFEST_HPP

#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "partsdet/errors.hpp"
#include "partsdet/regions.hpp"

namespace partsdet {

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw manifest_error("unknown split: " + s);
}

inline bool method_is_real(const std::string& m) { return m == "real"; }

// One face crop: metadata, crop box in the source frame, and landmarks in
// the normalized 288x288 crop space.
struct FrameRecord {
  std::string frame_id;
  std::string video_id;
  Split split = Split::Train;
  std::string method;  // "real", "DF", "F2F", "FS", "NT", or a custom tag
  int label = 0;       // 0 real, 1 fake
  std::string image_path;
  LandmarkSet landmarks;
  std::array<double, 4> box{};  // x0, y0, x1, y1 (half-open)
  std::string paired_real_frame_id;  // empty if none
};

struct DatasetManifest {
  std::string dataset;
  uint64_t seed = 0;
  std::vector<std::string> methods;
  std::vector<FrameRecord> records;
  std::string base_dir;  // directory of the manifest file, for relative paths

  std::unordered_map<std::string, size_t> index;

  void rebuild_index() {
    index.clear();
    for (size_t i = 0; i < records.size(); ++i) index[records[i].frame_id] = i;
  }

  const FrameRecord* find(const std::string& frame_id) const {
    auto it = index.find(frame_id);
    return it == index.end() ? nullptr : &records[it->second];
  }
};

inline std::string resolve_image_path(const DatasetManifest& m,
                                      const FrameRecord& r) {
  std::filesystem::path p(r.image_path);
  if (p.is_absolute() || m.base_dir.empty()) return r.image_path;
  return (std::filesystem::path(m.base_dir) / p).string();
}

namespace detail {

inline FrameRecord parse_record(const nlohmann::json& j, int line_no) {
  auto fail = [&](const std::string& what) -> void {
    throw manifest_error("line " + std::to_string(line_no) + ": " + what);
  };
  FrameRecord r;
  try {
    r.frame_id = j.at("frame_id").get<std::string>();
    r.video_id = j.at("video_id").get<std::string>();
    r.split = split_from_name(j.at("split").get<std::string>());
    r.method = j.at("method").get<std::string>();
    r.label = j.at("label").get<int>();
    r.image_path = j.at("image_path").get<std::string>();
    const auto& lm = j.at("landmarks");
    if (!lm.is_array() || lm.size() != kLandmarkCount)
      fail("landmarks must be an array of 68 [x,y] pairs");
    for (const auto& p : lm)
      r.landmarks.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    const auto& b = j.at("box");
    if (!b.is_array() || b.size() != 4) fail("box must be [x0,y0,x1,y1]");
    for (int i = 0; i < 4; ++i) r.box[i] = b.at(i).get<double>();
    if (j.contains("paired_real_frame_id"))
      r.paired_real_frame_id = j.at("paired_real_frame_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("bad record: ") + e.what());
  } catch (const manifest_error&) {
    throw;
  } catch (const std::exception& e) {
    fail(e.what());
  }
  if (r.label != 0 && r.label != 1) fail("label must be 0 or 1");
  if (method_is_real(r.method) != (r.label == 0))
    fail("label inconsistent with method for frame " + r.frame_id);
  validate_landmarks(r.landmarks);
  return r;
}

}  // namespace detail

// JSON-lines manifest: an optional header line (object with a "dataset" key
// and no "frame_id"), then one record per line.
inline DatasetManifest ingest_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw manifest_error("cannot open manifest: " + path);
  DatasetManifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();

  std::set<std::string> declared;
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw manifest_error("line " + std::to_string(line_no) + ": " +
                           e.what());
    }
    if (first && j.is_object() && j.contains("dataset") &&
        !j.contains("frame_id")) {
      m.dataset = j.at("dataset").get<std::string>();
      if (j.contains("seed")) m.seed = j.at("seed").get<uint64_t>();
      if (j.contains("methods"))
        for (const auto& s : j.at("methods"))
          m.methods.push_back(s.get<std::string>());
      declared.insert(m.methods.begin(), m.methods.end());
      first = false;
      continue;
    }
    first = false;
    FrameRecord r = detail::parse_record(j, line_no);
    if (m.index.count(r.frame_id))
      throw manifest_error("line " + std::to_string(line_no) +
                           ": duplicate frame_id " + r.frame_id);
    if (!declared.empty() && !method_is_real(r.method) &&
        !declared.count(r.method))
      throw manifest_error("line " + std::to_string(line_no) + ": method " +
                           r.method + " not in declared method set");
    m.index[r.frame_id] = m.records.size();
    m.records.push_back(std::move(r));
  }
  return m;
}

inline nlohmann::json record_to_json(const FrameRecord& r) {
  nlohmann::json j;
  j["frame_id"] = r.frame_id;
  j["video_id"] = r.video_id;
  j["split"] = split_name(r.split);
  j["method"] = r.method;
  j["label"] = r.label;
  j["image_path"] = r.image_path;
  nlohmann::json lm = nlohmann::json::array();
  for (const Point& p : r.landmarks) lm.push_back({p.x, p.y});
  j["landmarks"] = std::move(lm);
  j["box"] = {r.box[0], r.box[1], r.box[2], r.box[3]};
  if (!r.paired_real_frame_id.empty())
    j["paired_real_frame_id"] = r.paired_real_frame_id;
  return j;
}

inline void write_manifest(const std::string& path,
                           const DatasetManifest& m) {
  std::ostringstream os;
  nlohmann::json hdr;
  hdr["dataset"] = m.dataset;
  hdr["seed"] = m.seed;
  hdr["methods"] = m.methods;
  os << hdr.dump() << "\n";
  for (const FrameRecord& r : m.records) os << record_to_json(r).dump() << "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write manifest: " + path);
  out << os.str();
}

// Frames of one split, optionally one class only.
inline std::vector<size_t> select_records(const DatasetManifest& m, Split s) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < m.records.size(); ++i)
    if (m.records[i].split == s) idx.push_back(i);
  return idx;
}

}  // namespace partsdet

#endif
