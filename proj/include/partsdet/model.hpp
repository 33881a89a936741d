#ifndef PARTSDET_MODEL_HPP
#define PARTSDET_MODEL_HPP

#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "partsdet/errors.hpp"
#include "partsdet/layers.hpp"
#include "partsdet/regions.hpp"
#include "partsdet/rng.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

enum class Aggregation { Mean, Max, Fc, Ensemble };

inline const char* aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::Mean: return "mean";
    case Aggregation::Max: return "max";
    case Aggregation::Fc: return "fc";
    case Aggregation::Ensemble: return "ensemble";
  }
  return "?";
}

inline Aggregation aggregation_from_name(const std::string& s) {
  if (s == "mean") return Aggregation::Mean;
  if (s == "max") return Aggregation::Max;
  if (s == "fc") return Aggregation::Fc;
  if (s == "ensemble") return Aggregation::Ensemble;
  throw config_error("unknown aggregation: " + s);
}

// Architecture: stem (3x3 stride 2, then 3x3 stride 1) + two separable-conv
// blocks with stride-2 max pooling and 1x1 residual skips, then one branch
// per part (extra_blocks copies of the same 256-channel block) and a 1x1
// map head. Channel widths 32/64/128/256 divided by width_div for the toy
// profile. Map resolution = input / 2^(3 + extra_blocks).
struct ModelConfig {
  std::vector<RegionId> parts{RegionId::Nose, RegionId::Mouth, RegionId::Eyes,
                              RegionId::Chin};
  int extra_blocks = 1;  // per-branch blocks: 0, 1, or 2
  Aggregation agg = Aggregation::Mean;
  int input_size = 288;
  int width_div = 1;  // 4 = toy profile
  static constexpr int trunk_blocks = 2;

  int c_stem1() const { return std::max(1, 32 / width_div); }
  int c_stem2() const { return std::max(1, 64 / width_div); }
  int c_block1() const { return std::max(1, 128 / width_div); }
  int c_block2() const { return std::max(1, 256 / width_div); }

  int map_resolution() const { return input_size >> (3 + extra_blocks); }

  void validate() const {
    if (parts.empty() || parts.size() > 4)
      throw config_error("parts must name 1..4 regions");
    for (size_t i = 0; i + 1 < parts.size(); ++i)
      if (static_cast<int>(parts[i]) >= static_cast<int>(parts[i + 1]))
        throw config_error("parts must follow the canonical region order");
    if (extra_blocks < 0 || extra_blocks > 2)
      throw config_error("extra_blocks must be 0, 1, or 2");
    if (input_size <= 0 || input_size % (1 << (3 + extra_blocks)) != 0)
      throw config_error("input_size must be divisible by the stride product");
    if (width_div < 1) throw config_error("width_div must be >= 1");
  }

  std::string model_name() const {
    if (parts.size() == 4) return "Combined";
    std::string n;
    for (RegionId r : parts) {
      std::string rn = region_name(r);
      rn[0] = char(std::toupper(rn[0]));
      n += (n.empty() ? "" : "+") + rn;
    }
    return n;
  }
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  nlohmann::json parts = nlohmann::json::array();
  for (RegionId r : c.parts) parts.push_back(region_name(r));
  j["parts"] = std::move(parts);
  j["extra_blocks"] = c.extra_blocks;
  j["aggregation"] = aggregation_name(c.agg);
  j["input_size"] = c.input_size;
  j["width_div"] = c.width_div;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.parts.clear();
  for (const auto& s : j.at("parts"))
    c.parts.push_back(region_from_name(s.get<std::string>()));
  c.extra_blocks = j.at("extra_blocks").get<int>();
  c.agg = aggregation_from_name(j.at("aggregation").get<std::string>());
  c.input_size = j.at("input_size").get<int>();
  c.width_div = j.at("width_div").get<int>();
  c.validate();
  return c;
}

// --- Parameter storage -------------------------------------------------------

template <typename T>
struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> v;

  size_t count() const {
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    return n;
  }
};

template <typename T>
struct ParamStore {
  std::vector<NamedTensor<T>> tensors;
  std::unordered_map<std::string, size_t> index;

  NamedTensor<T>& add(const std::string& name, std::vector<int> shape) {
    NamedTensor<T> t;
    t.name = name;
    t.shape = std::move(shape);
    t.v.assign(t.count(), T(0));
    index[name] = tensors.size();
    tensors.push_back(std::move(t));
    return tensors.back();
  }

  bool has(const std::string& name) const { return index.count(name) > 0; }

  NamedTensor<T>& at(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw input_error("no such tensor: " + name);
    return tensors[it->second];
  }
  const NamedTensor<T>& at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw input_error("no such tensor: " + name);
    return tensors[it->second];
  }

  const std::vector<T>& vec(const std::string& name) const {
    return at(name).v;
  }

  // Same names/shapes, zero values; used for gradients and moments.
  ParamStore<T> zeros_like() const {
    ParamStore<T> z = *this;
    for (auto& t : z.tensors) std::fill(t.v.begin(), t.v.end(), T(0));
    return z;
  }

  size_t total_count() const {
    size_t n = 0;
    for (const auto& t : tensors) n += t.count();
    return n;
  }

  void add_scaled(const ParamStore<T>& other, T scale) {
    for (size_t i = 0; i < tensors.size(); ++i) {
      auto& a = tensors[i].v;
      const auto& b = other.tensors[i].v;
      for (size_t k = 0; k < a.size(); ++k) a[k] += scale * b[k];
    }
  }
};

template <typename T>
struct Model {
  ModelConfig config;
  ParamStore<T> params;
};

// One trunk+branches network; an ensemble model owns one per part.
struct SubnetLayout {
  std::string prefix;            // "" or "net/<region>/"
  std::vector<RegionId> parts;   // parts served by this subnet
};

inline std::vector<SubnetLayout> subnet_layouts(const ModelConfig& c) {
  if (c.agg != Aggregation::Ensemble) return {{"", c.parts}};
  std::vector<SubnetLayout> ls;
  for (RegionId r : c.parts)
    ls.push_back({std::string("net/") + region_name(r) + "/", {r}});
  return ls;
}

namespace detail {

template <typename T>
void add_block_params(ParamStore<T>& ps, const std::string& prefix, int cin,
                      int cout) {
  ps.add(prefix + "/sep1/dw", {cin, 3, 3});
  ps.add(prefix + "/sep1/pw", {cout, cin});
  ps.add(prefix + "/sep1/pb", {cout});
  ps.add(prefix + "/sep2/dw", {cout, 3, 3});
  ps.add(prefix + "/sep2/pw", {cout, cout});
  ps.add(prefix + "/sep2/pb", {cout});
  ps.add(prefix + "/skip/w", {cout, cin, 1, 1});
  ps.add(prefix + "/skip/b", {cout});
}

}  // namespace detail

template <typename T>
Model<T> build_model(const ModelConfig& config, uint64_t init_seed) {
  config.validate();
  Model<T> m;
  m.config = config;
  ParamStore<T>& ps = m.params;

  const int c1 = config.c_stem1(), c2 = config.c_stem2();
  const int c3 = config.c_block1(), c4 = config.c_block2();

  for (const SubnetLayout& sn : subnet_layouts(config)) {
    ps.add(sn.prefix + "trunk/stem1/w", {c1, 3, 3, 3});
    ps.add(sn.prefix + "trunk/stem1/b", {c1});
    ps.add(sn.prefix + "trunk/stem2/w", {c2, c1, 3, 3});
    ps.add(sn.prefix + "trunk/stem2/b", {c2});
    detail::add_block_params(ps, sn.prefix + "trunk/block1", c2, c3);
    detail::add_block_params(ps, sn.prefix + "trunk/block2", c3, c4);
    for (RegionId r : sn.parts) {
      for (int k = 1; k <= config.extra_blocks; ++k)
        detail::add_block_params(
            ps, sn.prefix + "branch/" + region_name(r) + "/block" +
                    std::to_string(k),
            c4, c4);
      ps.add(sn.prefix + "head/" + region_name(r) + "/w", {1, c4});
      ps.add(sn.prefix + "head/" + region_name(r) + "/b", {1});
    }
    if (config.agg == Aggregation::Ensemble) {
      ps.add(sn.prefix + "classifier/w", {1});
      ps.add(sn.prefix + "classifier/b", {1});
    }
  }
  if (config.agg != Aggregation::Ensemble) {
    const int pw = config.agg == Aggregation::Fc ? int(config.parts.size()) : 1;
    ps.add("classifier/w", {pw});
    ps.add("classifier/b", {1});
  }

  // He-style init for conv weights, zero biases, identity-scale classifier.
  Rng rng(derive_seed(init_seed, 0xa11c0de));
  for (auto& t : ps.tensors) {
    const bool is_bias = t.name.ends_with("/b") || t.name.ends_with("/pb");
    if (t.name.starts_with("classifier/") ||
        t.name.find("/classifier/") != std::string::npos) {
      if (!is_bias)
        std::fill(t.v.begin(), t.v.end(), T(1.0 / double(t.count())));
      continue;
    }
    if (is_bias) continue;
    size_t fan_in = 1;
    for (size_t d = 1; d < t.shape.size(); ++d) fan_in *= size_t(t.shape[d]);
    if (t.shape.size() == 3) fan_in = 9;  // depthwise (c,3,3)
    const double scale = std::sqrt(2.0 / double(fan_in));
    for (T& v : t.v) v = T(scale * rng.normal());
  }
  return m;
}

// --- Forward / backward ------------------------------------------------------

template <typename T>
struct BlockCache {
  Chw<T> in, relu_in, dw1, pw1, relu_mid, dw2, pw2;
  std::vector<int> argmax;
  int out_c = 0, out_h = 0, out_w = 0;
};

template <typename T>
struct SubnetCache {
  Chw<T> x;            // standardized input
  Chw<T> s1, r1, s2, r2;
  BlockCache<T> b1, b2;
  std::vector<std::vector<BlockCache<T>>> branch;  // [part][block]
  std::vector<Chw<T>> head_in;                     // branch output per part
};

template <typename T>
struct SampleCache {
  std::vector<SubnetCache<T>> subnets;
};

namespace detail {

template <typename T>
Chw<T> block_fwd(const ParamStore<T>& ps, const std::string& prefix,
                 bool leading_relu, const Chw<T>& in, BlockCache<T>& c) {
  c.in = in;
  c.relu_in = leading_relu ? relu_fwd(in) : in;
  c.dw1 = dw3x3_fwd(c.relu_in, ps.vec(prefix + "/sep1/dw"));
  c.pw1 = pw_fwd(c.dw1, ps.vec(prefix + "/sep1/pw"), ps.vec(prefix + "/sep1/pb"),
                 int(ps.at(prefix + "/sep1/pb").shape[0]));
  c.relu_mid = relu_fwd(c.pw1);
  c.dw2 = dw3x3_fwd(c.relu_mid, ps.vec(prefix + "/sep2/dw"));
  c.pw2 = pw_fwd(c.dw2, ps.vec(prefix + "/sep2/pw"), ps.vec(prefix + "/sep2/pb"),
                 int(ps.at(prefix + "/sep2/pb").shape[0]));
  Chw<T> out = maxpool3x3s2_fwd(c.pw2, c.argmax);
  const Chw<T> skip =
      conv2d_fwd(c.in, ps.vec(prefix + "/skip/w"), ps.vec(prefix + "/skip/b"),
                 int(ps.at(prefix + "/skip/b").shape[0]), 1, 1, 2, 0);
  add_inplace(out, skip);
  c.out_c = out.c;
  c.out_h = out.h;
  c.out_w = out.w;
  return out;
}

template <typename T>
Chw<T> block_bwd(const ParamStore<T>& ps, ParamStore<T>& gs,
                 const std::string& prefix, bool leading_relu,
                 const BlockCache<T>& c, const Chw<T>& dout) {
  // skip path
  Chw<T> din_skip;
  conv2d_bwd(c.in, ps.vec(prefix + "/skip/w"), dout, 1, 1, 2, 0,
             gs.at(prefix + "/skip/w").v, gs.at(prefix + "/skip/b").v,
             din_skip);
  // main path
  Chw<T> d = maxpool3x3s2_bwd(dout, c.argmax, c.pw2.c, c.pw2.h, c.pw2.w);
  Chw<T> d_dw2;
  pw_bwd(c.dw2, ps.vec(prefix + "/sep2/pw"), d, gs.at(prefix + "/sep2/pw").v,
         gs.at(prefix + "/sep2/pb").v, d_dw2);
  Chw<T> d_relu_mid;
  dw3x3_bwd(c.relu_mid, ps.vec(prefix + "/sep2/dw"), d_dw2,
            gs.at(prefix + "/sep2/dw").v, d_relu_mid);
  Chw<T> d_pw1 = relu_bwd(c.pw1, d_relu_mid);
  Chw<T> d_dw1;
  pw_bwd(c.dw1, ps.vec(prefix + "/sep1/pw"), d_pw1,
         gs.at(prefix + "/sep1/pw").v, gs.at(prefix + "/sep1/pb").v, d_dw1);
  Chw<T> d_relu_in;
  dw3x3_bwd(c.relu_in, ps.vec(prefix + "/sep1/dw"), d_dw1,
            gs.at(prefix + "/sep1/dw").v, d_relu_in);
  Chw<T> din = leading_relu ? relu_bwd(c.in, d_relu_in) : std::move(d_relu_in);
  add_inplace(din, din_skip);
  return din;
}

template <typename T>
Chw<T> standardize(const Image& img) {
  Chw<T> x(3, img.h, img.w);
  for (int c = 0; c < 3; ++c) {
    T* p = x.plane(c);
    for (int y = 0; y < img.h; ++y)
      for (int xx = 0; xx < img.w; ++xx)
        p[size_t(y) * img.w + xx] = T(2) * T(img.at(y, xx, c)) - T(1);
  }
  return x;
}

template <typename T>
std::vector<Grid<T>> subnet_fwd(const Model<T>& m, const SubnetLayout& sn,
                                const Image& img, SubnetCache<T>* cache) {
  const ParamStore<T>& ps = m.params;
  SubnetCache<T> local;
  SubnetCache<T>& c = cache ? *cache : local;

  c.x = standardize<T>(img);
  c.s1 = conv2d_fwd(c.x, ps.vec(sn.prefix + "trunk/stem1/w"),
                    ps.vec(sn.prefix + "trunk/stem1/b"), m.config.c_stem1(), 3,
                    3, 2, 1);
  c.r1 = relu_fwd(c.s1);
  c.s2 = conv2d_fwd(c.r1, ps.vec(sn.prefix + "trunk/stem2/w"),
                    ps.vec(sn.prefix + "trunk/stem2/b"), m.config.c_stem2(), 3,
                    3, 1, 1);
  c.r2 = relu_fwd(c.s2);
  Chw<T> t1 = block_fwd(ps, sn.prefix + "trunk/block1", false, c.r2, c.b1);
  Chw<T> t2 = block_fwd(ps, sn.prefix + "trunk/block2", true, t1, c.b2);

  c.branch.resize(sn.parts.size());
  c.head_in.resize(sn.parts.size());
  std::vector<Grid<T>> maps;
  for (size_t p = 0; p < sn.parts.size(); ++p) {
    const std::string rn = region_name(sn.parts[p]);
    Chw<T> cur = t2;
    c.branch[p].resize(m.config.extra_blocks);
    for (int k = 1; k <= m.config.extra_blocks; ++k)
      cur = block_fwd(ps,
                      sn.prefix + "branch/" + rn + "/block" + std::to_string(k),
                      true, cur, c.branch[p][k - 1]);
    c.head_in[p] = cur;
    const Chw<T> logit =
        pw_fwd(cur, ps.vec(sn.prefix + "head/" + rn + "/w"),
               ps.vec(sn.prefix + "head/" + rn + "/b"), 1);
    Grid<T> g(logit.h, logit.w);
    std::copy(logit.plane(0), logit.plane(0) + g.size(), g.v.begin());
    maps.push_back(std::move(g));
  }
  return maps;
}

template <typename T>
void subnet_bwd(const Model<T>& m, const SubnetLayout& sn,
                const SubnetCache<T>& c, const std::vector<Grid<T>>& dmaps,
                ParamStore<T>& gs) {
  const ParamStore<T>& ps = m.params;
  Chw<T> dtrunk_out;  // accumulated over parts

  for (size_t p = 0; p < sn.parts.size(); ++p) {
    const std::string rn = region_name(sn.parts[p]);
    const Chw<T>& hin = c.head_in[p];
    Chw<T> dlogit(1, dmaps[p].h, dmaps[p].w);
    std::copy(dmaps[p].v.begin(), dmaps[p].v.end(), dlogit.plane(0));
    Chw<T> dcur;
    pw_bwd(hin, ps.vec(sn.prefix + "head/" + rn + "/w"), dlogit,
           gs.at(sn.prefix + "head/" + rn + "/w").v,
           gs.at(sn.prefix + "head/" + rn + "/b").v, dcur);
    for (int k = m.config.extra_blocks; k >= 1; --k)
      dcur = block_bwd(ps, gs,
                       sn.prefix + "branch/" + rn + "/block" + std::to_string(k),
                       true, c.branch[p][k - 1], dcur);
    if (dtrunk_out.v.empty())
      dtrunk_out = std::move(dcur);
    else
      add_inplace(dtrunk_out, dcur);
  }

  Chw<T> d =
      block_bwd(ps, gs, sn.prefix + "trunk/block2", true, c.b2, dtrunk_out);
  d = block_bwd(ps, gs, sn.prefix + "trunk/block1", false, c.b1, d);
  d = relu_bwd(c.s2, d);
  Chw<T> dr1;
  conv2d_bwd(c.r1, ps.vec(sn.prefix + "trunk/stem2/w"), d, 3, 3, 1, 1,
             gs.at(sn.prefix + "trunk/stem2/w").v,
             gs.at(sn.prefix + "trunk/stem2/b").v, dr1);
  d = relu_bwd(c.s1, dr1);
  Chw<T> dx;
  conv2d_bwd(c.x, ps.vec(sn.prefix + "trunk/stem1/w"), d, 3, 3, 2, 1,
             gs.at(sn.prefix + "trunk/stem1/w").v,
             gs.at(sn.prefix + "trunk/stem1/b").v, dx);
}

}  // namespace detail

// Per-part single-channel logit maps for one sample, in config.parts order.
template <typename T>
std::vector<Grid<T>> forward_sample(const Model<T>& m, const Image& img,
                                    SampleCache<T>* cache = nullptr) {
  if (img.h != m.config.input_size || img.w != m.config.input_size)
    throw input_error("forward: image size mismatch");
  const auto layouts = subnet_layouts(m.config);
  if (cache) cache->subnets.resize(layouts.size());
  std::vector<Grid<T>> maps;
  for (size_t s = 0; s < layouts.size(); ++s) {
    auto ms = detail::subnet_fwd(m, layouts[s], img,
                                 cache ? &cache->subnets[s] : nullptr);
    for (auto& g : ms) maps.push_back(std::move(g));
  }
  return maps;
}

// dmaps must align with the maps returned by forward_sample.
template <typename T>
void backward_sample(const Model<T>& m, const SampleCache<T>& cache,
                     const std::vector<Grid<T>>& dmaps, ParamStore<T>& grads) {
  const auto layouts = subnet_layouts(m.config);
  size_t off = 0;
  for (size_t s = 0; s < layouts.size(); ++s) {
    std::vector<Grid<T>> part(dmaps.begin() + off,
                              dmaps.begin() + off + layouts[s].parts.size());
    detail::subnet_bwd(m, layouts[s], cache.subnets[s], part, grads);
    off += layouts[s].parts.size();
  }
}

// Classifier weights in the layout classify() expects: one (w, b) pair for
// mean/max, a weight per part for fc, per-member pairs for ensemble.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> classifier_weights(
    const Model<T>& m) {
  if (m.config.agg == Aggregation::Ensemble) {
    std::vector<T> w, b;
    for (RegionId r : m.config.parts) {
      const std::string p = std::string("net/") + region_name(r);
      w.push_back(m.params.vec(p + "/classifier/w")[0]);
      b.push_back(m.params.vec(p + "/classifier/b")[0]);
    }
    return {w, b};
  }
  return {m.params.vec("classifier/w"), m.params.vec("classifier/b")};
}

// Exact parameter counts per named group plus "total".
template <typename T>
std::map<std::string, size_t> parameter_count(const Model<T>& m) {
  std::map<std::string, size_t> counts;
  size_t total = 0;
  for (const auto& t : m.params.tensors) {
    std::string group;
    std::string rest = t.name;
    if (rest.starts_with("net/")) {
      const size_t slash = rest.find('/', 4);
      group = rest.substr(0, slash);
      rest = rest.substr(slash + 1);
    }
    const size_t slash = rest.find('/');
    std::string top = rest.substr(0, slash);
    if (top == "branch" || top == "head") {
      const size_t s2 = rest.find('/', slash + 1);
      top = rest.substr(0, s2);
    }
    if (top.starts_with("head")) top = "map_" + top;
    counts[group.empty() ? top : group + "/" + top] += t.count();
    total += t.count();
  }
  counts["total"] = total;
  return counts;
}

}  // namespace partsdet

#endif
