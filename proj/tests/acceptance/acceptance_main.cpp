// Acceptance suite: runs every criterion end to end and prints one
// pass/fail line per criterion. Criterion 5 exercises the CLI binary the
// way a user would; the rest drive the library directly.
//
// usage: acceptance_tests <path-to-partsdet-cli> <work-dir>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "partsdet/evaluate.hpp"
#include "partsdet/forensics.hpp"
#include "partsdet/image_io.hpp"
#include "partsdet/metrics.hpp"
#include "partsdet/objectives.hpp"
#include "partsdet/receptive.hpp"
#include "partsdet/rng.hpp"
#include "partsdet/schedule.hpp"
#include "partsdet/synth.hpp"
#include "partsdet/trainer.hpp"

using namespace partsdet;
namespace fs = std::filesystem;

namespace {

struct Harness {
  int failed = 0;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void result(int crit, const std::string& desc, bool ok,
              const std::string& detail = "") {
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("[%s] criterion %2d: %s%s%s  (%.1fs elapsed)\n",
                ok ? "PASS" : "FAIL", crit, desc.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str(), dt);
    std::fflush(stdout);
    if (!ok) ++failed;
  }

  void skip(int crit, const std::string& desc, const std::string& why) {
    std::printf("[SKIP] criterion %2d: %s -- %s\n", crit, desc.c_str(),
                why.c_str());
    std::fflush(stdout);
  }
};

std::string g_cli;
fs::path g_work;

int run_cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " >> " +
                          (g_work / "cli.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Image random_image(int s, uint64_t seed) {
  Rng rng(seed);
  Image img(s, s);
  for (float& v : img.v) v = float(rng.uniform01());
  return img;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// ---------------------------------------------------------------------------

void criterion_1(Harness& h) {
  Grid<double> z(2, 2, 0.0);
  GridF t(2, 2, 0.f);
  const double ml = mask_loss<double>(z, t);
  const bool ok1 = std::abs(ml - 4.0 * std::log(2.0)) < 1e-9;

  std::vector<Grid<double>> maps = {Grid<double>(2, 2, 0.0)};
  const auto lb = total_loss<double>(maps, {RegionId::Nose},
                                     zero_mask_set(2, 2), 0.0, 0, 10.0);
  const bool ok2 = std::abs(lb.total - 41.0 * std::log(2.0)) < 1e-9;
  h.result(1, "analytic loss values (4 ln 2 and ln 2 + 40 ln 2)", ok1 && ok2);
}

void criterion_2(Harness& h) {
  // toy profile: 96 px input, widths / 4, multi-part loss (Eq. 1-4 combined)
  ModelConfig mc;
  mc.extra_blocks = 1;
  mc.input_size = 96;
  mc.width_div = 4;
  Model<double> model = build_model<double>(mc, 1001);
  TrainConfig tc;
  tc.lambda = 10.0;

  const int mr = mc.map_resolution();
  std::vector<Image> images = {random_image(96, 1002), random_image(96, 1003)};
  std::vector<int> labels = {0, 1};
  RegionMaskSet fake_targets = zero_mask_set(mr, mr);
  {
    Rng rng(1004);
    for (auto& g : fake_targets.masks)
      for (auto& v : g.v) v = float(rng.uniform01());
  }
  std::vector<RegionMaskSet> targets = {zero_mask_set(mr, mr), fake_targets};

  auto loss_of = [&]() {
    double total = 0;
    const auto [w, b] = classifier_weights(model);
    for (size_t i = 0; i < images.size(); ++i) {
      const auto maps = forward_sample(model, images[i]);
      const auto pred = classify<double>(maps, mc.agg, w, b);
      total += total_loss<double>(maps, mc.parts, targets[i], pred.yhat,
                                  labels[i], tc.lambda)
                   .total;
    }
    return total / double(images.size());
  };

  ParamStore<double> grads = model.params.zeros_like();
  SampleCache<double> ws;
  for (size_t i = 0; i < images.size(); ++i)
    partsdet::detail::train_sample<double>(model, images[i], labels[i],
                                           targets[i], 0.5, tc, grads, ws);

  // ReLU and max pooling make the loss piecewise smooth: when the +-h
  // stencil straddles a kink, the difference quotient is invalid no matter
  // how exact the analytic gradient is. A probe therefore only counts when
  // the quotient is stable under step shrinking; unstable probes are
  // redrawn. The comparison itself stays at step 1e-3.
  auto central_diff = [&](double& coord, double h0, bool& clean) {
    const double orig = coord;
    double prev = 0;
    clean = false;
    for (int k = 0; k < 3; ++k) {
      const double step = h0 / std::pow(4.0, k);
      coord = orig + step;
      const double lp = loss_of();
      coord = orig - step;
      const double lm = loss_of();
      coord = orig;
      const double fd = (lp - lm) / (2 * step);
      if (k > 0 && rel_err(fd, prev) < 1e-5) {
        clean = true;
        return k == 1 ? prev : fd;  // report the widest stable step
      }
      prev = fd;
    }
    return prev;
  };

  Rng probe(1005);
  int checked = 0, attempts = 0, kinks = 0;
  double worst = 0;
  bool ok = true;
  while (checked < 20 && attempts < 300) {
    ++attempts;
    const size_t ti = probe.uniform_int(model.params.tensors.size());
    auto& tensor = model.params.tensors[ti];
    const size_t ei = probe.uniform_int(tensor.v.size());
    const double a = grads.tensors[ti].v[ei];
    if (std::abs(a) < 1e-7) continue;
    bool clean = false;
    const double fd = central_diff(tensor.v[ei], 1e-3, clean);
    if (!clean) {
      ++kinks;
      continue;
    }
    const double err = rel_err(a, fd);
    worst = std::max(worst, err);
    if (err >= 1e-4) ok = false;
    ++checked;
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "%d probes, worst rel err %.2e, %d kink redraws", checked,
                worst, kinks);
  h.result(2, "gradients match central differences (toy profile)",
           ok && checked == 20, detail);
}

void criterion_3(Harness& h) {
  Rng rng(31337);
  bool ok = true;
  for (int trial = 0; trial < 200 && ok; ++trial) {
    const size_t n = 2 + rng.uniform_int(499);
    ScoreSet s;
    const int levels = 1 + int(rng.uniform_int(30));
    for (size_t i = 0; i < n; ++i) {
      s.scores.push_back(double(rng.uniform_int(levels)) / levels);
      s.labels.push_back(rng.uniform01() < 0.5 ? 0 : 1);
    }
    bool has0 = false, has1 = false;
    for (int l : s.labels) (l ? has1 : has0) = true;
    if (!has0) s.labels[0] = 0;
    if (!has1) s.labels[n - 1] = 1;

    double brute = 0;
    size_t nf = 0, nr = 0;
    for (size_t i = 0; i < n; ++i) {
      if (s.labels[i] != 1) continue;
      ++nf;
      for (size_t j = 0; j < n; ++j) {
        if (s.labels[j] != 0) continue;
        if (s.scores[i] > s.scores[j]) brute += 1.0;
        else if (s.scores[i] == s.scores[j]) brute += 0.5;
      }
    }
    for (int l : s.labels) nr += size_t(l == 0);
    brute /= double(nf) * double(nr);

    const auto roc = roc_curve(s);
    double area = 0;
    for (size_t i = 1; i < roc.size(); ++i)
      area += (roc[i].first - roc[i - 1].first) *
              (roc[i].second + roc[i - 1].second) * 0.5;

    const double fast = auc(s);
    ok = std::abs(fast - brute) < 1e-12 && std::abs(fast - area) < 1e-12;
  }
  h.result(3, "auc equals pairwise oracle and ROC trapezoid area (200 sets)",
           ok);
}

void criterion_4(Harness& h) {
  bool ok = true;
  std::string detail;
  for (int extra : {0, 1}) {
    ModelConfig mc;
    mc.parts = {RegionId::Mouth};
    mc.extra_blocks = extra;
    mc.input_size = 96;
    mc.width_div = 4;
    const Model<float> m = build_model<float>(mc, 2001);
    const int mr = mc.map_resolution();
    const int cy = mr / 2, cx = mr / 2;
    const ReceptiveField rf = receptive_field(m, 0, cy, cx);
    if (extra == 0) {
      detail = "trunk-only field " + std::to_string(rf.h) + "x" +
               std::to_string(rf.w) + " px";
      if (!(rf.h < 96 && rf.w < 96)) ok = false;
    }
    const Image img = random_image(96, 2002 + extra);
    const float before = forward_sample(m, img)[0].at(cy, cx);
    Image masked(96, 96, 0.f);
    for (int y = rf.y0; y <= rf.y1; ++y)
      for (int x = rf.x0; x <= rf.x1; ++x)
        for (int c = 0; c < 3; ++c) masked.at(y, x, c) = img.at(y, x, c);
    const float after = forward_sample(m, masked)[0].at(cy, cx);
    if (before != after) ok = false;  // must be exactly zero change
  }
  h.result(4, "locality: zeroing outside the measured field changes nothing",
           ok, detail);
}

struct DeskRun {
  fs::path mouth_data, eyes_data, mouth_ckpt, eyes_ckpt;
  bool trained = false;
};

void criterion_5(Harness& h, DeskRun& desk) {
  desk.mouth_data = g_work / "synth_mouth";
  desk.eyes_data = g_work / "synth_eyes";
  const fs::path mouth_out = g_work / "train_mouth";
  const fs::path eyes_out = g_work / "train_eyes";

  bool ok = true;
  ok &= run_cli("synth-gen --out " + desk.mouth_data.string() +
                " --seed 11 --n-videos 200 --frames-per-video 4 --regions "
                "mouth --amplitude 0.2 --train-fraction 0.6 "
                "--val-fraction 0.15") == 0;
  ok &= run_cli("synth-gen --out " + desk.eyes_data.string() +
                " --seed 12 --n-videos 200 --frames-per-video 4 --regions "
                "eyes --amplitude 0.2 --train-fraction 0.6 "
                "--val-fraction 0.15") == 0;
  if (!ok) {
    h.result(5, "desk-scale learning + region specificity", false,
             "synth-gen failed");
    return;
  }

  ok &= run_cli("train --desk-profile --data " + desk.mouth_data.string() +
                " --out " + mouth_out.string() +
                " --parts mouth --seed 21") == 0;
  ok &= run_cli("train --desk-profile --data " + desk.eyes_data.string() +
                " --out " + eyes_out.string() +
                " --parts eyes --seed 22") == 0;
  if (!ok) {
    h.result(5, "desk-scale learning + region specificity", false,
             "training failed");
    return;
  }
  desk.mouth_ckpt = mouth_out / "checkpoint.bin";
  desk.eyes_ckpt = eyes_out / "checkpoint.bin";
  desk.trained = true;

  // 2x2 transfer matrix through the CLI
  const fs::path ckpt_dir = g_work / "ckpts";
  const fs::path data_dir = g_work / "datasets";
  fs::create_directories(ckpt_dir);
  fs::create_directories(data_dir);
  fs::copy_file(desk.mouth_ckpt, ckpt_dir / "mouth.bin",
                fs::copy_options::overwrite_existing);
  fs::copy_file(desk.eyes_ckpt, ckpt_dir / "eyes.bin",
                fs::copy_options::overwrite_existing);
  std::error_code ec;
  fs::create_directory_symlink(desk.mouth_data, data_dir / "mouth", ec);
  fs::create_directory_symlink(desk.eyes_data, data_dir / "eyes", ec);

  const fs::path report_dir = g_work / "transfer";
  ok &= run_cli("transfer-matrix --checkpoints " + ckpt_dir.string() +
                " --data " + data_dir.string() + " --split test --out " +
                report_dir.string()) == 0;
  if (!ok) {
    h.result(5, "desk-scale learning + region specificity", false,
             "transfer-matrix failed");
    return;
  }

  const TransferReport rep =
      parse_report_csv(file_bytes(report_dir / "report.csv"));
  double diag_min = 1.0, off_lo = 1.0, off_hi = 0.0;
  for (const TransferCell& c : rep.cells) {
    if (c.grouping != "video") continue;
    if (c.in_distribution) {
      diag_min = std::min(diag_min, c.auc);
    } else {
      off_lo = std::min(off_lo, c.auc);
      off_hi = std::max(off_hi, c.auc);
    }
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "diagonal min %.3f, off-diagonal [%.3f, %.3f]", diag_min,
                off_lo, off_hi);
  ok = diag_min >= 0.90 && off_lo >= 0.40 && off_hi <= 0.60;
  h.result(5, "desk-scale learning + region specificity (2x2 matrix)", ok,
           detail);
}

void criterion_6(Harness& h) {
  bool ok = true;
  // ablation configs build with the documented map resolutions
  for (int extra : {0, 1, 2}) {
    ModelConfig full;
    full.extra_blocks = extra;  // 288 input, full widths
    const Model<float> m = build_model<float>(full, 3001);
    const int expect = extra == 0 ? 36 : extra == 1 ? 18 : 9;
    if (m.config.map_resolution() != expect) ok = false;
  }
  // forward shapes agree on the toy widths
  for (int extra : {0, 1, 2}) {
    ModelConfig mc;
    mc.extra_blocks = extra;
    mc.width_div = 8;
    const Model<float> m = build_model<float>(mc, 3002);
    const auto maps = forward_sample(m, random_image(288, 3003));
    const int expect = extra == 0 ? 36 : extra == 1 ? 18 : 9;
    if (maps[0].h != expect || maps[0].w != expect) ok = false;
  }
  // branch independence, bitwise
  ModelConfig mc;
  mc.extra_blocks = 1;
  mc.input_size = 96;
  mc.width_div = 4;
  Model<float> m = build_model<float>(mc, 3004);
  const Image img = random_image(96, 3005);
  const auto before = forward_sample(m, img);
  for (auto& t : m.params.tensors)
    if (t.name.starts_with("branch/eyes/") || t.name.starts_with("head/eyes/"))
      for (float& v : t.v) v += 0.5f;
  const auto after = forward_sample(m, img);
  const int eyes_idx = 2;  // canonical order nose, mouth, eyes, chin
  if (before[eyes_idx].v == after[eyes_idx].v) ok = false;
  for (int p = 0; p < 4; ++p)
    if (p != eyes_idx && before[p].v != after[p].v) ok = false;
  h.result(6, "branch independence + ablation map resolutions {36,18,9}", ok);
}

void criterion_7(Harness& h) {
  ModelConfig ens;
  ens.agg = Aggregation::Ensemble;
  ens.extra_blocks = 1;  // full profile, all four parts
  const auto counts = parameter_count(build_model<float>(ens, 4001));
  const size_t total = counts.at("total");
  // reference figure 1.6M with a documented +-25% tolerance for the
  // truncation ambiguity; hard ceiling: the 20M full backbone
  const bool ok = total < 20'000'000 && total >= size_t(1.6e6 * 0.75) &&
                  total <= size_t(1.6e6 * 1.25);
  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "ensemble total %zu params (reference 1.6M +-25%%)", total);
  h.result(7, "parameter accounting for the four-network ensemble", ok,
           detail);
}

void criterion_8(Harness& h) {
  // exact properties
  const Image a = random_image(24, 5001);
  const Image b = random_image(24, 5002);
  GridF mask(24, 24);
  Rng rng(5003);
  for (auto& v : mask.v) v = float(rng.uniform01());
  const DiffMap ab = diff_map(a, b, mask, RegionId::Nose);
  const DiffMap ba = diff_map(b, a, mask, RegionId::Nose);
  const DiffMap aa = diff_map(a, a, mask, RegionId::Nose);
  bool ok = ab.values.v == ba.values.v;
  for (float v : aa.values.v)
    if (v != 0.f) ok = false;

  // synthetic mouth corpus dominance
  SynthConfig cfg;
  cfg.n_videos = 8;
  cfg.frames_per_video = 2;
  cfg.artifact_regions = {RegionId::Mouth};
  cfg.amplitude = 0.2;
  cfg.seed = 5004;
  const fs::path dir = g_work / "stats_corpus";
  fs::remove_all(dir);
  const DatasetManifest m = synth_generate(cfg, dir.string());
  DiffStatsOptions opt;
  const DiffSummary s = diff_summary(m, opt);
  const double mouth = s.value("synth", RegionId::Mouth);
  double ratio = 1e9;
  for (RegionId r : {RegionId::Nose, RegionId::Eyes, RegionId::Chin}) {
    const double other = s.value("synth", r);
    ratio = std::min(ratio, other > 0 ? mouth / other : 1e9);
  }
  if (!(ratio >= 3.0)) ok = false;
  char detail[96];
  std::snprintf(detail, sizeof(detail), "mouth/other mean ratio >= %.1f",
                ratio);

  const char* ffpp = std::getenv("FPF_FFPP_MANIFEST");
  if (!ffpp) {
    h.result(8, "statistics engine (synthetic corpus)", ok, detail);
    h.skip(8, "FF++ Table-2 reference cells",
           "dataset-gated; set FPF_FFPP_MANIFEST to enable");
    return;
  }
  const DatasetManifest ff = ingest_manifest(ffpp);
  const DiffSummary fs_sum = diff_summary(ff, opt);
  bool ff_ok =
      std::abs(fs_sum.value("DF", RegionId::Eyes) - 0.0479) <= 0.005;
  for (const std::string method : {"DF", "F2F", "FS", "NT"})
    if (!(fs_sum.value(method, RegionId::Eyes) >
          fs_sum.value(method, RegionId::Nose)))
      ff_ok = false;
  h.result(8, "statistics engine (synthetic + FF++ reference)", ok && ff_ok,
           detail);
}

void criterion_9(Harness& h, const DeskRun& desk) {
  bool ok = true;
  std::string detail;

  // (a) full desk-profile training repeated with the same seed
  if (desk.trained) {
    const fs::path rerun = g_work / "train_mouth_again";
    ok &= run_cli("train --desk-profile --data " + desk.mouth_data.string() +
                  " --out " + rerun.string() + " --parts mouth --seed 21") ==
          0;
    if (ok) {
      const bool logs_equal =
          file_bytes(g_work / "train_mouth" / "metrics.csv") ==
          file_bytes(rerun / "metrics.csv");
      const bool ckpt_equal = file_bytes(desk.mouth_ckpt) ==
                              file_bytes(rerun / "checkpoint.bin");
      ok = logs_equal && ckpt_equal;
      detail = logs_equal ? "metric logs identical" : "metric logs differ";
    }
  } else {
    ok = false;
    detail = "desk training unavailable";
  }

  // (b) strict-deterministic resume equals the uninterrupted run bitwise
  {
    SynthConfig cfg;
    cfg.n_videos = 8;
    cfg.frames_per_video = 2;
    cfg.artifact_regions = {RegionId::Mouth};
    cfg.seed = 6001;
    cfg.train_fraction = 1.0;
    cfg.val_fraction = 0.0;
    const fs::path dir = g_work / "resume_data";
    fs::remove_all(dir);
    const DatasetManifest m = synth_generate(cfg, dir.string());

    ModelConfig mc;
    mc.parts = {RegionId::Mouth};
    mc.extra_blocks = 1;
    mc.input_size = 96;
    mc.width_div = 4;
    TrainConfig tc;
    tc.steps = 60;
    tc.batch_size = 8;
    tc.lr_drop_every = 30;
    tc.seed = 6002;
    tc.strict_deterministic = true;
    tc.log_every = 10;
    tc.mask_params.dilate_iterations = 3;
    tc.mask_params.sigma = 7.0 * 96 / 288;

    const fs::path full_out = g_work / "resume_full";
    const fs::path res_out = g_work / "resume_cont";
    fs::remove_all(full_out);
    fs::remove_all(res_out);
    train(mc, m, tc, full_out.string());
    const CheckpointData ck =
        load_checkpoint((full_out / "ckpt_30.bin").string());
    Trainer resumed(ck, m);
    resumed.run(res_out.string());
    const bool resume_ok = file_bytes(full_out / "checkpoint.bin") ==
                           file_bytes(res_out / "checkpoint.bin");
    if (!resume_ok) ok = false;
    detail += resume_ok ? "; resume bitwise-identical" : "; resume differs";
  }
  h.result(9, "determinism: repeated run + mid-run resume", ok, detail);
}

void criterion_10(Harness& h) {
  TrainConfig c;  // 40k steps, drop every 10k by 10
  std::vector<double> distinct;
  for (int64_t s = 0; s < 40000; ++s) {
    const double lr = lr_schedule(s, c);
    if (distinct.empty() || distinct.back() != lr) distinct.push_back(lr);
  }
  bool ok = distinct.size() == 4;
  const double expect[4] = {1e-4, 1e-5, 1e-6, 1e-7};
  for (int i = 0; i < 4 && ok; ++i)
    ok = rel_err(distinct[i], expect[i]) < 1e-12;
  // boundary placement
  ok = ok && lr_schedule(9999, c) == distinct[0] &&
       lr_schedule(10000, c) == distinct[1] &&
       lr_schedule(39999, c) == distinct[3];
  h.result(10, "lr schedule emits exactly {1e-4,1e-5,1e-6,1e-7}", ok);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance_tests <partsdet-cli> <work-dir>\n";
    return 2;
  }
  g_cli = fs::absolute(argv[1]).string();
  g_work = fs::absolute(argv[2]);
  fs::create_directories(g_work);

  Harness h;
  DeskRun desk;
  criterion_1(h);
  criterion_2(h);
  criterion_3(h);
  criterion_4(h);
  criterion_5(h, desk);
  criterion_6(h);
  criterion_7(h);
  criterion_8(h);
  criterion_9(h, desk);
  criterion_10(h);

  std::printf("%s: %d criterion failure(s)\n", h.failed ? "FAILED" : "OK",
              h.failed);
  return h.failed ? 1 : 0;
}
