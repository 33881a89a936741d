#ifndef PARTSDET_TRAINER_HPP
#define PARTSDET_TRAINER_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "partsdet/adam.hpp"
#include "partsdet/batch.hpp"
#include "partsdet/checkpoint.hpp"
#include "partsdet/errors.hpp"
#include "partsdet/manifest.hpp"
#include "partsdet/model.hpp"
#include "partsdet/objectives.hpp"
#include "partsdet/rng.hpp"
#include "partsdet/schedule.hpp"

namespace partsdet {

struct TrainConfig {
  int64_t steps = 40000;
  int batch_size = 128;
  double lr0 = 1e-4;
  double beta1 = 0.928;
  double beta2 = 0.999;
  double weight_decay = 5e-5;
  int64_t lr_drop_every = 10000;
  double lr_drop_factor = 10.0;
  uint64_t seed = 0;
  double lambda = 10.0;
  bool desk_profile = false;

  // run plumbing
  int jobs = 0;                    // 0 = hardware concurrency
  bool strict_deterministic = false;  // forces single-threaded math
  int jpeg_quality = 95;
  int log_every = 100;
  MaskReduction mask_reduction = MaskReduction::Sum;
  MaskParams mask_params;

  void validate() const {
    if (steps <= 0 || batch_size <= 0 || lr0 <= 0 || lr_drop_every <= 0 ||
        lr_drop_factor <= 0 || lambda < 0)
      throw config_error("train config: values must be positive");
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
      throw config_error("train config: betas must be in (0,1)");
    if (weight_decay < 0) throw config_error("train config: bad weight_decay");
    if (lr_drop_every > steps)
      throw config_error("train config: lr_drop_every must be <= steps");
  }
};

inline double lr_schedule(int64_t step, const TrainConfig& c) {
  return lr_schedule(step, c.lr0, c.lr_drop_every, c.lr_drop_factor);
}

// Documented desk-scale reproduction profile: toy widths, 96 px input,
// batch 16, 2000 steps, mask geometry scaled to the 96 px canvas.
inline void apply_desk_profile(TrainConfig& tc, ModelConfig& mc) {
  mc.input_size = 96;
  mc.width_div = 4;
  tc.batch_size = 16;
  tc.steps = 2000;
  tc.lr_drop_every = 2000;
  tc.mask_params.dilate_iterations = 3;
  tc.mask_params.sigma = 7.0 * 96.0 / 288.0;
}

// --- Flat key=value config files --------------------------------------------

inline std::string train_config_to_text(const TrainConfig& c) {
  std::ostringstream os;
  os << "steps=" << c.steps << "\n";
  os << "batch_size=" << c.batch_size << "\n";
  char buf[64];
  auto put = [&](const char* k, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << k << "=" << buf << "\n";
  };
  put("lr0", c.lr0);
  put("beta1", c.beta1);
  put("beta2", c.beta2);
  put("weight_decay", c.weight_decay);
  os << "lr_drop_every=" << c.lr_drop_every << "\n";
  put("lr_drop_factor", c.lr_drop_factor);
  os << "seed=" << c.seed << "\n";
  put("lambda", c.lambda);
  os << "desk_profile=" << (c.desk_profile ? 1 : 0) << "\n";
  os << "jobs=" << c.jobs << "\n";
  os << "strict_deterministic=" << (c.strict_deterministic ? 1 : 0) << "\n";
  os << "jpeg_quality=" << c.jpeg_quality << "\n";
  os << "log_every=" << c.log_every << "\n";
  os << "mask_iterations=" << c.mask_params.dilate_iterations << "\n";
  put("mask_sigma", c.mask_params.sigma);
  put("binarize_threshold", c.mask_params.binarize_threshold);
  os << "mask_reduction="
     << (c.mask_reduction == MaskReduction::Sum ? "sum" : "mean") << "\n";
  return os.str();
}

inline bool parse_bool_value(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw config_error("bad boolean value: " + v);
}

// Flat key=value lines; '#' starts a comment; later keys win.
inline void parse_train_config_text(const std::string& text, TrainConfig& c) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) +
                         ": expected key=value");
    const std::string k = line.substr(0, eq);
    const std::string v = line.substr(eq + 1);
    try {
      if (k == "steps") c.steps = std::stoll(v);
      else if (k == "batch_size") c.batch_size = std::stoi(v);
      else if (k == "lr0") c.lr0 = std::stod(v);
      else if (k == "beta1") c.beta1 = std::stod(v);
      else if (k == "beta2") c.beta2 = std::stod(v);
      else if (k == "weight_decay") c.weight_decay = std::stod(v);
      else if (k == "lr_drop_every") c.lr_drop_every = std::stoll(v);
      else if (k == "lr_drop_factor") c.lr_drop_factor = std::stod(v);
      else if (k == "seed") c.seed = std::stoull(v);
      else if (k == "lambda") c.lambda = std::stod(v);
      else if (k == "desk_profile") c.desk_profile = parse_bool_value(v);
      else if (k == "jobs") c.jobs = std::stoi(v);
      else if (k == "strict_deterministic")
        c.strict_deterministic = parse_bool_value(v);
      else if (k == "jpeg_quality") c.jpeg_quality = std::stoi(v);
      else if (k == "log_every") c.log_every = std::stoi(v);
      else if (k == "mask_iterations")
        c.mask_params.dilate_iterations = std::stoi(v);
      else if (k == "mask_sigma") c.mask_params.sigma = std::stod(v);
      else if (k == "binarize_threshold")
        c.mask_params.binarize_threshold = std::stod(v);
      else if (k == "mask_reduction")
        c.mask_reduction = v == "mean" ? MaskReduction::Mean
                                       : v == "sum" ? MaskReduction::Sum
                                                    : throw config_error(
                                                          "bad mask_reduction");
      else
        throw config_error("config line " + std::to_string(line_no) +
                           ": unknown key " + k);
    } catch (const config_error&) {
      throw;
    } catch (const std::exception&) {
      throw config_error("config line " + std::to_string(line_no) +
                         ": bad value for " + k);
    }
  }
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["lr0"] = c.lr0;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["weight_decay"] = c.weight_decay;
  j["lr_drop_every"] = c.lr_drop_every;
  j["lr_drop_factor"] = c.lr_drop_factor;
  j["seed"] = c.seed;
  j["lambda"] = c.lambda;
  j["desk_profile"] = c.desk_profile;
  j["jobs"] = c.jobs;
  j["strict_deterministic"] = c.strict_deterministic;
  j["jpeg_quality"] = c.jpeg_quality;
  j["log_every"] = c.log_every;
  j["mask_iterations"] = c.mask_params.dilate_iterations;
  j["mask_sigma"] = c.mask_params.sigma;
  j["binarize_threshold"] = c.mask_params.binarize_threshold;
  j["mask_reduction"] =
      c.mask_reduction == MaskReduction::Sum ? "sum" : "mean";
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps = j.at("steps").get<int64_t>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr0 = j.at("lr0").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.lr_drop_every = j.at("lr_drop_every").get<int64_t>();
  c.lr_drop_factor = j.at("lr_drop_factor").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.lambda = j.at("lambda").get<double>();
  c.desk_profile = j.at("desk_profile").get<bool>();
  c.jobs = j.value("jobs", 0);
  c.strict_deterministic = j.value("strict_deterministic", false);
  c.jpeg_quality = j.value("jpeg_quality", 95);
  c.log_every = j.value("log_every", 100);
  c.mask_params.dilate_iterations = j.value("mask_iterations", 8);
  c.mask_params.sigma = j.value("mask_sigma", 7.0);
  c.mask_params.binarize_threshold = j.value("binarize_threshold", -1.0);
  c.mask_reduction = j.value("mask_reduction", std::string("sum")) == "mean"
                         ? MaskReduction::Mean
                         : MaskReduction::Sum;
  return c;
}

// --- Training loop -----------------------------------------------------------

struct StepStats {
  double class_loss = 0;
  std::vector<double> mask_losses;  // per configured part
  double total = 0;
};

struct TrainResult {
  std::string checkpoint_path;
  std::string log_path;
  double first_total = 0;
  double last_total = 0;
  int64_t final_step = 0;
};

namespace detail {

// Forward + losses + backward for one sample; gradients are scaled by
// 1/batch so accumulation yields batch-mean gradients. The workspace is
// reused across calls to avoid reallocating every activation buffer.
template <typename T>
StepStats train_sample(const Model<T>& model, const Image& img, int label,
                       const RegionMaskSet& targets, T inv_batch,
                       const TrainConfig& tc, ParamStore<T>& grads,
                       SampleCache<T>& cache) {
  const auto maps = forward_sample(model, img, &cache);
  const auto [w, b] = classifier_weights(model);
  const Prediction<T> pred = classify<T>(maps, model.config.agg, w, b);
  const LossBreakdown<T> loss =
      total_loss<T>(maps, model.config.parts, targets, pred.yhat, label,
                    T(tc.lambda), tc.mask_reduction);

  // d(total)/dmap: mask term plus the classification pathway.
  std::vector<Grid<T>> dmaps;
  for (size_t p = 0; p < maps.size(); ++p) {
    Grid<T> g = mask_loss_grad<T>(maps[p], targets.of(model.config.parts[p]),
                                  tc.mask_reduction);
    const T s = T(tc.lambda) * inv_batch;
    for (auto& v : g.v) v *= s;
    dmaps.push_back(std::move(g));
  }
  const T dyhat = class_loss_grad<T>(pred.yhat, label) * inv_batch;
  if (model.config.agg == Aggregation::Ensemble) {
    std::vector<T> dw(w.size(), T(0)), db(b.size(), T(0));
    classify_backward<T>(maps, pred, model.config.agg, w, dyhat, dw, db,
                         dmaps);
    for (size_t p = 0; p < model.config.parts.size(); ++p) {
      const std::string pre =
          std::string("net/") + region_name(model.config.parts[p]);
      grads.at(pre + "/classifier/w").v[0] += dw[p];
      grads.at(pre + "/classifier/b").v[0] += db[p];
    }
  } else {
    classify_backward<T>(maps, pred, model.config.agg, w, dyhat,
                         grads.at("classifier/w").v, grads.at("classifier/b").v,
                         dmaps);
  }
  backward_sample(model, cache, dmaps, grads);

  StepStats st;
  st.class_loss = double(loss.class_value);
  for (T v : loss.mask_losses) st.mask_losses.push_back(double(v));
  st.total = double(loss.total);
  return st;
}

}  // namespace detail

class Trainer {
 public:
  Trainer(Model<float> model, const DatasetManifest& manifest, TrainConfig tc)
      : model_(std::move(model)),
        manifest_(manifest),
        tc_(tc),
        opt_(AdamState<float>::init(model_.params)),
        rng_(derive_seed(tc.seed, 0xda7a)) {
    tc_.validate();
    bool has_real = false, has_fake = false;
    for (size_t i : select_records(manifest_, Split::Train)) {
      (manifest_.records[i].label == 0 ? has_real : has_fake) = true;
    }
    if (!has_real || !has_fake)
      throw batch_error("train: manifest needs both classes in train split");
  }

  // Resume from a checkpoint produced by this trainer.
  Trainer(const CheckpointData& ck, const DatasetManifest& manifest)
      : model_(model_from_checkpoint(ck)),
        manifest_(manifest),
        tc_(train_config_from_json(ck.train_config)),
        opt_(AdamState<float>::init(model_.params)),
        rng_(0) {
    if (!ck.has_moments)
      throw training_error("resume: checkpoint has no optimizer state");
    for (size_t i = 0; i < opt_.m.tensors.size(); ++i) {
      opt_.m.tensors[i].v = ck.adam_m.at(opt_.m.tensors[i].name).v;
      opt_.v.tensors[i].v = ck.adam_v.at(opt_.v.tensors[i].name).v;
    }
    opt_.t = ck.adam_t;
    step_ = ck.step;
    rng_.deserialize(ck.rng_state);
  }

  TrainResult run(const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string log_path =
        (std::filesystem::path(out_dir) / "metrics.csv").string();
    std::ofstream log(log_path, std::ios::trunc);
    log << "step,lr";
    log << ",class_loss";
    for (RegionId r : model_.config.parts)
      log << ",mask_loss_" << region_name(r);
    log << ",total\n";

    BatchOptions bopt;
    bopt.size = tc_.batch_size;
    bopt.policy = BatchPolicy::Balanced;
    bopt.input_size = model_.config.input_size;
    bopt.map_h = model_.config.map_resolution();
    bopt.map_w = model_.config.map_resolution();
    bopt.jpeg_quality = tc_.jpeg_quality;
    bopt.mask_params = tc_.mask_params;
    bopt.split = Split::Train;

    const AdamConfig acfg{tc_.beta1, tc_.beta2, 1e-8, tc_.weight_decay};
    const int jobs =
        tc_.strict_deterministic ? 1 : effective_train_jobs(tc_.jobs);

    TrainResult res;
    res.log_path = log_path;
    bool first_logged = false;

    for (; step_ < tc_.steps; ++step_) {
      const double lr = lr_schedule(step_, tc_);
      const Batch batch = make_batch(manifest_, bopt, rng_, &cache_);
      const size_t B = batch.size();
      const float inv_batch = 1.f / float(B);

      if (grads_.tensors.empty()) grads_ = model_.params.zeros_like();
      for (auto& t : grads_.tensors) std::fill(t.v.begin(), t.v.end(), 0.f);
      ParamStore<float>& grads = grads_;
      std::vector<StepStats> stats(B);

      if (jobs <= 1 || B <= 1) {
        if (tcaches_.empty()) tcaches_.resize(1);
        for (size_t i = 0; i < B; ++i)
          stats[i] = detail::train_sample<float>(model_, batch.images[i],
                                                 batch.labels[i],
                                                 batch.mask_sets[i], inv_batch,
                                                 tc_, grads, tcaches_[0]);
      } else {
        // Static contiguous chunks; per-thread gradients reduced in thread
        // order keep the result bit-reproducible for a fixed job count.
        const int T = std::min<int>(jobs, int(B));
        if (int(tgrads_.size()) < T)
          tgrads_.assign(T, model_.params.zeros_like());
        if (int(tcaches_.size()) < T) tcaches_.resize(T);
        for (int t = 0; t < T; ++t)
          for (auto& tt : tgrads_[t].tensors)
            std::fill(tt.v.begin(), tt.v.end(), 0.f);
        std::vector<std::thread> workers;
        std::exception_ptr err;
        std::mutex err_mu;
        for (int t = 0; t < T; ++t) {
          const size_t lo = B * size_t(t) / T, hi = B * size_t(t + 1) / T;
          workers.emplace_back([&, t, lo, hi]() {
            try {
              for (size_t i = lo; i < hi; ++i)
                stats[i] = detail::train_sample<float>(
                    model_, batch.images[i], batch.labels[i],
                    batch.mask_sets[i], inv_batch, tc_, tgrads_[t],
                    tcaches_[t]);
            } catch (...) {
              std::lock_guard<std::mutex> lk(err_mu);
              if (!err) err = std::current_exception();
            }
          });
        }
        for (auto& w : workers) w.join();
        if (err) std::rethrow_exception(err);
        for (int t = 0; t < T; ++t) grads.add_scaled(tgrads_[t], 1.f);
      }

      StepStats mean;
      mean.mask_losses.assign(model_.config.parts.size(), 0.0);
      for (const StepStats& s : stats) {
        mean.class_loss += s.class_loss;
        for (size_t p = 0; p < s.mask_losses.size(); ++p)
          mean.mask_losses[p] += s.mask_losses[p];
        mean.total += s.total;
      }
      mean.class_loss /= double(B);
      for (double& v : mean.mask_losses) v /= double(B);
      mean.total /= double(B);

      if (!std::isfinite(mean.total))
        throw training_error(
            "training diverged (non-finite loss) at step " +
            std::to_string(step_) + "; last good checkpoint kept");

      adam_step<float>(model_.params, grads, opt_, float(lr), acfg);

      if (step_ % tc_.log_every == 0) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.10g", lr);
        log << step_ << ',' << buf;
        std::snprintf(buf, sizeof(buf), "%.9g", mean.class_loss);
        log << ',' << buf;
        for (double v : mean.mask_losses) {
          std::snprintf(buf, sizeof(buf), "%.9g", v);
          log << ',' << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.9g", mean.total);
        log << ',' << buf << '\n';
        log.flush();
      }
      if (!first_logged) {
        res.first_total = mean.total;
        first_logged = true;
      }
      res.last_total = mean.total;

      // The snapshot records the number of completed steps so a resume
      // continues exactly where the stream left off.
      if ((step_ + 1) % tc_.lr_drop_every == 0 && step_ + 1 < tc_.steps)
        save(out_dir, "ckpt_" + std::to_string(step_ + 1) + ".bin",
             step_ + 1);
    }

    res.checkpoint_path = save(out_dir, "checkpoint.bin", step_);
    res.final_step = step_;
    return res;
  }

  std::string save(const std::string& out_dir, const std::string& name,
                   int64_t completed_steps) {
    const std::string path =
        (std::filesystem::path(out_dir) / name).string();
    save_checkpoint(path, model_, &opt_, completed_steps,
                    train_config_to_json(tc_), tc_.seed, rng_.serialize());
    return path;
  }

  const Model<float>& model() const { return model_; }
  int64_t step() const { return step_; }

  static int effective_train_jobs(int jobs) {
    if (jobs > 0) return jobs;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
  }

 private:
  Model<float> model_;
  const DatasetManifest& manifest_;
  TrainConfig tc_;
  AdamState<float> opt_;
  Rng rng_;
  int64_t step_ = 0;
  FrameCache cache_;
  // reusable step workspaces
  ParamStore<float> grads_;
  std::vector<ParamStore<float>> tgrads_;
  std::vector<SampleCache<float>> tcaches_;
};

inline TrainResult train(const ModelConfig& mc, const DatasetManifest& manifest,
                         const TrainConfig& tc, const std::string& out_dir) {
  Trainer tr(build_model<float>(mc, tc.seed), manifest, tc);
  return tr.run(out_dir);
}

}  // namespace partsdet

#endif
