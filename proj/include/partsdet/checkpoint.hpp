#ifndef PARTSDET_CHECKPOINT_HPP
#define PARTSDET_CHECKPOINT_HPP

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "partsdet/adam.hpp"
#include "partsdet/errors.hpp"
#include "partsdet/model.hpp"

namespace partsdet {

// Checkpoint layout: 8-byte magic, u64 little-endian header length, JSON
// header, then one raw little-endian float32 buffer per tensor listed in
// the header (parameters first, then optional Adam moments).
constexpr char kCheckpointMagic[8] = {'P', 'D', 'C', 'H', 'K', 'P', 'T', '1'};

struct CheckpointData {
  ModelConfig model_config;
  nlohmann::json train_config;  // null when absent
  int64_t step = 0;
  uint64_t seed = 0;
  std::string rng_state;
  ParamStore<float> params;
  bool has_moments = false;
  ParamStore<float> adam_m;
  ParamStore<float> adam_v;
  int64_t adam_t = 0;
};

namespace detail {

inline void write_u64le(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline uint64_t read_u64le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

inline void write_f32_buffer(std::ostream& os, const std::vector<float>& v) {
  // Little-endian float32; this build targets little-endian hosts.
  os.write(reinterpret_cast<const char*>(v.data()),
           std::streamsize(v.size() * sizeof(float)));
}

inline void read_f32_buffer(std::istream& is, std::vector<float>& v) {
  is.read(reinterpret_cast<char*>(v.data()),
          std::streamsize(v.size() * sizeof(float)));
}

inline nlohmann::json tensor_table(const ParamStore<float>& ps,
                                   const std::string& prefix = "") {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : ps.tensors) {
    nlohmann::json e;
    e["name"] = prefix + t.name;
    e["shape"] = t.shape;
    arr.push_back(std::move(e));
  }
  return arr;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Model<float>& model,
                            const AdamState<float>* opt, int64_t step,
                            const nlohmann::json& train_config, uint64_t seed,
                            const std::string& rng_state) {
  nlohmann::json hdr;
  hdr["version"] = 1;
  hdr["config"] = model_config_to_json(model.config);
  hdr["train_config"] = train_config;
  hdr["step"] = step;
  hdr["seed"] = seed;
  hdr["rng_state"] = rng_state;
  nlohmann::json tensors = detail::tensor_table(model.params);
  if (opt) {
    for (const auto& e : detail::tensor_table(opt->m, "adam.m/"))
      tensors.push_back(e);
    for (const auto& e : detail::tensor_table(opt->v, "adam.v/"))
      tensors.push_back(e);
    hdr["adam_t"] = opt->t;
  }
  hdr["tensors"] = std::move(tensors);
  hdr["has_moments"] = opt != nullptr;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot write checkpoint: " + path);
    os.write(kCheckpointMagic, 8);
    const std::string h = hdr.dump();
    detail::write_u64le(os, h.size());
    os.write(h.data(), std::streamsize(h.size()));
    for (const auto& t : model.params.tensors) detail::write_f32_buffer(os, t.v);
    if (opt) {
      for (const auto& t : opt->m.tensors) detail::write_f32_buffer(os, t.v);
      for (const auto& t : opt->v.tensors) detail::write_f32_buffer(os, t.v);
    }
    if (!os) throw io_error("short write: " + path);
  }
  std::filesystem::rename(tmp, path);
}

inline CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw io_error("not a checkpoint file: " + path);
  const uint64_t hlen = detail::read_u64le(is);
  std::string h(hlen, '\0');
  is.read(h.data(), std::streamsize(hlen));
  if (!is) throw io_error("truncated checkpoint header: " + path);
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(h);
  } catch (const nlohmann::json::exception& e) {
    throw io_error("bad checkpoint header: " + std::string(e.what()));
  }

  CheckpointData out;
  out.model_config = model_config_from_json(hdr.at("config"));
  out.train_config = hdr.value("train_config", nlohmann::json());
  out.step = hdr.at("step").get<int64_t>();
  out.seed = hdr.at("seed").get<uint64_t>();
  out.rng_state = hdr.value("rng_state", std::string());
  out.has_moments = hdr.value("has_moments", false);
  out.adam_t = hdr.value("adam_t", int64_t(0));

  for (const auto& e : hdr.at("tensors")) {
    const std::string name = e.at("name").get<std::string>();
    const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
    ParamStore<float>* dst = &out.params;
    std::string local = name;
    if (name.starts_with("adam.m/")) {
      dst = &out.adam_m;
      local = name.substr(7);
    } else if (name.starts_with("adam.v/")) {
      dst = &out.adam_v;
      local = name.substr(7);
    }
    auto& t = dst->add(local, shape);
    detail::read_f32_buffer(is, t.v);
  }
  if (!is) throw io_error("truncated checkpoint tensors: " + path);
  return out;
}

// Rebuild a model from a checkpoint, validating names and shapes against a
// freshly built skeleton.
inline Model<float> model_from_checkpoint(const CheckpointData& ck) {
  Model<float> m = build_model<float>(ck.model_config, ck.seed);
  if (m.params.tensors.size() != ck.params.tensors.size())
    throw io_error("checkpoint tensor count mismatch");
  for (auto& t : m.params.tensors) {
    const auto& src = ck.params.at(t.name);
    if (src.shape != t.shape)
      throw io_error("checkpoint shape mismatch for " + t.name);
    t.v = src.v;
  }
  return m;
}

// Copy trunk groups from a checkpoint into an existing model (pretrained
// trunk import). Returns the number of tensors copied.
inline int load_pretrained_trunk(Model<float>& model,
                                 const std::string& path) {
  const CheckpointData ck = load_checkpoint(path);
  int copied = 0;
  for (auto& t : model.params.tensors) {
    if (t.name.find("trunk/") == std::string::npos) continue;
    if (!ck.params.has(t.name)) continue;
    const auto& src = ck.params.at(t.name);
    if (src.shape != t.shape)
      throw io_error("trunk import shape mismatch for " + t.name);
    t.v = src.v;
    ++copied;
  }
  if (copied == 0) throw io_error("trunk import: no matching trunk tensors");
  return copied;
}

}  // namespace partsdet

#endif
