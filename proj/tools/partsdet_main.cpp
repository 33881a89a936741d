// partsdet command line: dataset generation, mask materialization, training,
// evaluation, transfer matrices, and pixel-difference statistics.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "partsdet/checkpoint.hpp"
#include "partsdet/errors.hpp"
#include "partsdet/evaluate.hpp"
#include "partsdet/forensics.hpp"
#include "partsdet/image_io.hpp"
#include "partsdet/manifest.hpp"
#include "partsdet/mask_pipeline.hpp"
#include "partsdet/plot.hpp"
#include "partsdet/synth.hpp"
#include "partsdet/trainer.hpp"
#include "partsdet/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace partsdet;

namespace {

std::string find_manifest(const std::string& data) {
  if (fs::is_directory(data)) {
    const fs::path p = fs::path(data) / "manifest.jsonl";
    if (!fs::exists(p))
      throw manifest_error("no manifest.jsonl under " + data);
    return p.string();
  }
  return data;
}

std::vector<RegionId> parse_regions(const std::string& csv) {
  std::vector<RegionId> out;
  std::string cur;
  std::istringstream is(csv);
  while (std::getline(is, cur, ',')) {
    if (!cur.empty()) out.push_back(region_from_name(cur));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw invalid_parameter_error("no regions given");
  return out;
}

// Every command drops a run manifest next to its outputs: enough to re-run
// the command identically.
struct RunScope {
  json j;
  std::string out_dir;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  RunScope(const std::string& command, const std::string& out,
           const std::vector<std::string>& argv_tail) {
    out_dir = out;
    j["command"] = command;
    j["argv"] = argv_tail;
    j["version"] = kVersion;
  }

  void finish() {
    j["wall_clock_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    fs::create_directories(out_dir);
    atomic_write_text((fs::path(out_dir) / "run.json").string(), j.dump(2));
  }
};

std::vector<std::string> g_argv;

int cmd_synth_gen(const std::string& out, SynthConfig cfg) {
  RunScope run("synth-gen", out, g_argv);
  const DatasetManifest m = synth_generate(cfg, out);
  run.j["config"] = {{"n_videos", cfg.n_videos},
                     {"frames_per_video", cfg.frames_per_video},
                     {"artifact_kind", artifact_kind_name(cfg.artifact_kind)},
                     {"amplitude", cfg.amplitude},
                     {"seed", cfg.seed},
                     {"train_fraction", cfg.train_fraction},
                     {"val_fraction", cfg.val_fraction}};
  json regions = json::array();
  for (RegionId r : cfg.artifact_regions) regions.push_back(region_name(r));
  run.j["config"]["artifact_regions"] = std::move(regions);
  run.j["outputs"] = {{"manifest", "manifest.jsonl"},
                      {"n_records", m.records.size()}};
  run.finish();
  std::cout << "wrote " << m.records.size() << " frames under " << out << "\n";
  return 0;
}

int cmd_make_masks(const std::string& data, const std::string& out, int canvas,
                   int target, MaskParams params) {
  RunScope run("make-masks", out, g_argv);
  const DatasetManifest m = ingest_manifest(find_manifest(data));
  fs::create_directories(out);
  size_t n = 0;
  for (const FrameRecord& r : m.records) {
    LandmarkSet lm = r.landmarks;
    if (canvas != 288) {
      const double s = canvas / 288.0;
      for (Point& p : lm) {
        p.x *= s;
        p.y *= s;
      }
    }
    const RegionMaskSet set =
        build_region_masks_cached(lm, canvas, canvas, target, target, params);
    for (RegionId reg : kAllRegions) {
      write_mask_png((fs::path(out) / mask_filename(r.frame_id, reg)).string(),
                     set.of(reg));
      ++n;
    }
  }
  run.j["config"] = {{"canvas", canvas},
                     {"target", target},
                     {"iterations", params.dilate_iterations},
                     {"sigma", params.sigma},
                     {"binarize_threshold", params.binarize_threshold}};
  run.j["inputs"] = {{"manifest", data}};
  run.j["outputs"] = {{"n_masks", n}};
  run.finish();
  std::cout << "wrote " << n << " masks under " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& out,
              const ModelConfig& mc, const TrainConfig& tc,
              const std::string& init_trunk, const std::string& resume) {
  RunScope run("train", out, g_argv);
  const DatasetManifest m = ingest_manifest(find_manifest(data));

  TrainResult res;
  if (!resume.empty()) {
    const CheckpointData ck = load_checkpoint(resume);
    Trainer tr(ck, m);
    res = tr.run(out);
    run.j["config"]["resumed_from"] = resume;
    run.j["config"]["train"] = ck.train_config;
    run.j["config"]["model"] = model_config_to_json(ck.model_config);
  } else {
    Model<float> model = build_model<float>(mc, tc.seed);
    if (!init_trunk.empty()) {
      const int n = load_pretrained_trunk(model, init_trunk);
      run.j["config"]["init_trunk"] = init_trunk;
      run.j["config"]["init_trunk_tensors"] = n;
    }
    Trainer tr(std::move(model), m, tc);
    res = tr.run(out);
    run.j["config"]["train"] = train_config_to_json(tc);
    run.j["config"]["model"] = model_config_to_json(mc);
  }
  run.j["inputs"] = {{"manifest", data}};
  run.j["outputs"] = {{"checkpoint", res.checkpoint_path},
                      {"metrics", res.log_path},
                      {"first_total", res.first_total},
                      {"last_total", res.last_total}};
  run.finish();
  std::cout << "trained to step " << res.final_step << ", total loss "
            << res.first_total << " -> " << res.last_total << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data,
             const std::string& split, const std::string& grouping,
             const std::string& out, int jobs) {
  RunScope run("eval", out, g_argv);
  const CheckpointData ck = load_checkpoint(ckpt);
  const Model<float> model = model_from_checkpoint(ck);
  const DatasetManifest m = ingest_manifest(find_manifest(data));

  EvalOptions opt;
  opt.split = split_from_name(split);
  opt.jobs = jobs;
  if (!ck.train_config.is_null())
    opt.jpeg_quality = ck.train_config.value("jpeg_quality", 95);

  const auto frames = evaluate_frames(model, m, opt);
  fs::create_directories(out);
  {
    std::ostringstream os;
    os << "frame_id,video_id,label,score\n";
    for (const auto& f : frames) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.8f", f.score);
      os << f.frame_id << ',' << f.video_id << ',' << f.label << ',' << buf
         << '\n';
    }
    atomic_write_text((fs::path(out) / "scores.csv").string(), os.str());
  }

  json metrics;
  for (Grouping g : {Grouping::Video, Grouping::Frame}) {
    const ScoreSet s = to_scoreset(frames, g);
    metrics[std::string("auc_") + grouping_name(g)] = auc(s);
    metrics[std::string("balanced_accuracy_") + grouping_name(g)] =
        balanced_accuracy(s);
    metrics[std::string("n_") + grouping_name(g)] = s.size();
  }
  atomic_write_text((fs::path(out) / "metrics.json").string(),
                    metrics.dump(2));
  run.j["inputs"] = {{"checkpoint", ckpt}, {"manifest", data}};
  run.j["config"] = {{"split", split}, {"grouping", grouping}};
  run.j["outputs"] = metrics;
  run.finish();

  const std::string key = std::string("auc_") + grouping;
  std::cout << "auc(" << grouping << ") = " << metrics[key] << ", n_frames "
            << frames.size() << "\n";
  return 0;
}

int cmd_transfer_matrix(const std::string& ckpt_dir, const std::string& data_dir,
                        const std::string& split, const std::string& out,
                        int jobs) {
  RunScope run("transfer-matrix", out, g_argv);
  std::map<std::string, Model<float>> models;
  for (const auto& e : fs::directory_iterator(ckpt_dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext != ".bin" && ext != ".ckpt") continue;
    models.emplace(e.path().stem().string(),
                   model_from_checkpoint(load_checkpoint(e.path().string())));
  }
  std::map<std::string, DatasetManifest> manifests;
  for (const auto& e : fs::directory_iterator(data_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.jsonl"))
      manifests.emplace(e.path().filename().string(),
                        ingest_manifest((e.path() / "manifest.jsonl").string()));
    else if (e.is_regular_file() && e.path().extension() == ".jsonl")
      manifests.emplace(e.path().stem().string(),
                        ingest_manifest(e.path().string()));
  }
  if (models.empty()) throw metric_error("no checkpoints in " + ckpt_dir);
  if (manifests.empty()) throw metric_error("no manifests in " + data_dir);

  std::map<std::string, const Model<float>*> mp;
  for (auto& [k, v] : models) mp[k] = &v;
  std::map<std::string, const DatasetManifest*> dp;
  for (auto& [k, v] : manifests) dp[k] = &v;

  EvalOptions opt;
  opt.split = split_from_name(split);
  opt.jobs = jobs;
  const TransferReport rep = transfer_matrix(mp, dp, opt);

  fs::create_directories(out);
  atomic_write_text((fs::path(out) / "report.csv").string(),
                    render_report_csv(rep));
  atomic_write_text((fs::path(out) / "report.md").string(),
                    render_report_markdown(rep));
  run.j["inputs"] = {{"checkpoints", ckpt_dir}, {"data", data_dir}};
  run.j["config"] = {{"split", split}};
  run.j["outputs"] = {{"cells", rep.cells.size()}};
  run.finish();
  std::cout << "transfer matrix: " << models.size() << " models x "
            << manifests.size() << " datasets -> " << out << "\n";
  return 0;
}

int cmd_stats(const std::string& data, const std::string& out,
              DiffStatsOptions opt) {
  RunScope run("stats", out, g_argv);
  const DatasetManifest m = ingest_manifest(find_manifest(data));

  const DiffSummary summary = diff_summary(m, opt);
  std::vector<RegionHistogram> hists;
  for (RegionId r : kAllRegions)
    hists.push_back(region_histogram(m, r, opt));

  fs::create_directories(out);
  atomic_write_text((fs::path(out) / "summary.csv").string(),
                    diff_summary_csv(summary));
  atomic_write_text((fs::path(out) / "summary.md").string(),
                    diff_summary_markdown(summary));
  atomic_write_text((fs::path(out) / "histograms.csv").string(),
                    histograms_csv(hists));
  write_image_png((fs::path(out) / "histograms.png").string(),
                  plot::render_histogram_grid(hists));

  run.j["inputs"] = {{"manifest", data}};
  run.j["config"] = {{"bins", opt.bins},
                     {"frames_per_video", opt.frames_per_video},
                     {"hard_count", opt.hard_count},
                     {"iterations", opt.mask_params.dilate_iterations},
                     {"sigma", opt.mask_params.sigma}};
  run.j["outputs"] = {{"rows", summary.rows.size()}};
  run.finish();
  std::cout << "stats over " << summary.rows.size() << " (method, region) cells -> "
            << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) g_argv.push_back(argv[i]);

  CLI::App app{"parts-based facial forgery detection toolkit"};
  app.require_subcommand(1);

  // synth-gen
  auto* sg = app.add_subcommand("synth-gen", "generate a synthetic dataset");
  std::string sg_out, sg_regions = "mouth", sg_kind = "colorshift";
  SynthConfig sg_cfg;
  sg->add_option("--out", sg_out)->required();
  sg->add_option("--seed", sg_cfg.seed);
  sg->add_option("--n-videos", sg_cfg.n_videos);
  sg->add_option("--frames-per-video", sg_cfg.frames_per_video);
  sg->add_option("--regions", sg_regions, "comma-separated artifact regions");
  sg->add_option("--kind", sg_kind, "noise|blur|colorshift");
  sg->add_option("--amplitude", sg_cfg.amplitude);
  sg->add_option("--train-fraction", sg_cfg.train_fraction);
  sg->add_option("--val-fraction", sg_cfg.val_fraction);
  sg->add_option("--name", sg_cfg.dataset_name);

  // make-masks
  auto* mm = app.add_subcommand("make-masks", "materialize region masks");
  std::string mm_data, mm_out;
  int mm_canvas = 288, mm_target = 18;
  MaskParams mm_params;
  mm->add_option("--data", mm_data)->required();
  mm->add_option("--out", mm_out)->required();
  mm->add_option("--canvas", mm_canvas);
  mm->add_option("--target", mm_target);
  mm->add_option("--iterations", mm_params.dilate_iterations);
  mm->add_option("--sigma", mm_params.sigma);
  mm->add_option("--binarize-threshold", mm_params.binarize_threshold);

  // train
  auto* tr = app.add_subcommand("train", "train a detector");
  std::string tr_data, tr_out, tr_config, tr_parts = "nose,mouth,eyes,chin";
  std::string tr_agg = "mean", tr_init_trunk, tr_resume;
  ModelConfig tr_mc;
  TrainConfig tr_tc;
  bool tr_desk = false, tr_strict = false;
  tr->add_option("--data", tr_data)->required();
  tr->add_option("--out", tr_out)->required();
  tr->add_option("--config", tr_config, "flat key=value config file");
  tr->add_flag("--desk-profile", tr_desk);
  auto* o_parts = tr->add_option("--parts", tr_parts);
  auto* o_extra = tr->add_option("--extra-blocks", tr_mc.extra_blocks);
  auto* o_agg = tr->add_option("--aggregation", tr_agg);
  auto* o_input = tr->add_option("--input-size", tr_mc.input_size);
  auto* o_wd = tr->add_option("--width-div", tr_mc.width_div);
  auto* o_steps = tr->add_option("--steps", tr_tc.steps);
  auto* o_bs = tr->add_option("--batch-size", tr_tc.batch_size);
  auto* o_lr = tr->add_option("--lr0", tr_tc.lr0);
  auto* o_b1 = tr->add_option("--beta1", tr_tc.beta1);
  auto* o_b2 = tr->add_option("--beta2", tr_tc.beta2);
  auto* o_wdec = tr->add_option("--weight-decay", tr_tc.weight_decay);
  auto* o_lde = tr->add_option("--lr-drop-every", tr_tc.lr_drop_every);
  auto* o_ldf = tr->add_option("--lr-drop-factor", tr_tc.lr_drop_factor);
  auto* o_seed = tr->add_option("--seed", tr_tc.seed);
  auto* o_lambda = tr->add_option("--lambda", tr_tc.lambda);
  auto* o_jobs = tr->add_option("--jobs", tr_tc.jobs);
  tr->add_flag("--strict-deterministic", tr_strict);
  auto* o_jq = tr->add_option("--jpeg-quality", tr_tc.jpeg_quality);
  auto* o_le = tr->add_option("--log-every", tr_tc.log_every);
  auto* o_mi = tr->add_option("--mask-iterations",
                              tr_tc.mask_params.dilate_iterations);
  auto* o_ms = tr->add_option("--mask-sigma", tr_tc.mask_params.sigma);
  auto* o_bt = tr->add_option("--binarize-threshold",
                              tr_tc.mask_params.binarize_threshold);
  std::string tr_mask_red = "sum";
  auto* o_mr = tr->add_option("--mask-reduction", tr_mask_red, "sum|mean");
  tr->add_option("--init-trunk", tr_init_trunk);
  tr->add_option("--resume", tr_resume);

  // eval
  auto* ev = app.add_subcommand("eval", "score a manifest with a checkpoint");
  std::string ev_ckpt, ev_data, ev_split = "test", ev_grouping = "video",
              ev_out;
  int ev_jobs = 0;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--split", ev_split);
  ev->add_option("--grouping", ev_grouping);
  ev->add_option("--out", ev_out)->required();
  ev->add_option("--jobs", ev_jobs);

  // transfer-matrix
  auto* tm = app.add_subcommand("transfer-matrix",
                                "cross-split evaluation grid");
  std::string tm_ckpts, tm_data, tm_split = "test", tm_out;
  int tm_jobs = 0;
  tm->add_option("--checkpoints", tm_ckpts)->required();
  tm->add_option("--data", tm_data)->required();
  tm->add_option("--split", tm_split);
  tm->add_option("--out", tm_out)->required();
  tm->add_option("--jobs", tm_jobs);

  // stats
  auto* st = app.add_subcommand("stats", "paired pixel-difference statistics");
  std::string st_data, st_out;
  DiffStatsOptions st_opt;
  st->add_option("--data", st_data)->required();
  st->add_option("--out", st_out)->required();
  st->add_option("--bins", st_opt.bins);
  st->add_option("--frames-per-video", st_opt.frames_per_video);
  st->add_flag("--hard-count", st_opt.hard_count);
  st->add_option("--iterations", st_opt.mask_params.dilate_iterations);
  st->add_option("--sigma", st_opt.mask_params.sigma);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sg->parsed()) {
      sg_cfg.artifact_regions = parse_regions(sg_regions);
      sg_cfg.artifact_kind = artifact_kind_from_name(sg_kind);
      return cmd_synth_gen(sg_out, sg_cfg);
    }
    if (mm->parsed())
      return cmd_make_masks(mm_data, mm_out, mm_canvas, mm_target, mm_params);
    if (tr->parsed()) {
      if (!tr_config.empty())
        parse_train_config_text(read_text(tr_config), tr_tc);
      if (tr_desk) tr_tc.desk_profile = true;
      if (tr_tc.desk_profile) apply_desk_profile(tr_tc, tr_mc);
      // explicit flags override config file and profile
      auto set_if = [](CLI::Option* o) { return o->count() > 0; };
      if (set_if(o_steps)) tr_tc.steps = std::stoll(o_steps->results()[0]);
      if (set_if(o_bs)) tr_tc.batch_size = std::stoi(o_bs->results()[0]);
      if (set_if(o_lr)) tr_tc.lr0 = std::stod(o_lr->results()[0]);
      if (set_if(o_b1)) tr_tc.beta1 = std::stod(o_b1->results()[0]);
      if (set_if(o_b2)) tr_tc.beta2 = std::stod(o_b2->results()[0]);
      if (set_if(o_wdec))
        tr_tc.weight_decay = std::stod(o_wdec->results()[0]);
      if (set_if(o_lde))
        tr_tc.lr_drop_every = std::stoll(o_lde->results()[0]);
      if (set_if(o_ldf))
        tr_tc.lr_drop_factor = std::stod(o_ldf->results()[0]);
      if (set_if(o_seed)) tr_tc.seed = std::stoull(o_seed->results()[0]);
      if (set_if(o_lambda)) tr_tc.lambda = std::stod(o_lambda->results()[0]);
      if (set_if(o_jobs)) tr_tc.jobs = std::stoi(o_jobs->results()[0]);
      if (tr_strict) tr_tc.strict_deterministic = true;
      if (set_if(o_jq)) tr_tc.jpeg_quality = std::stoi(o_jq->results()[0]);
      if (set_if(o_le)) tr_tc.log_every = std::stoi(o_le->results()[0]);
      if (set_if(o_mi))
        tr_tc.mask_params.dilate_iterations = std::stoi(o_mi->results()[0]);
      if (set_if(o_ms)) tr_tc.mask_params.sigma = std::stod(o_ms->results()[0]);
      if (set_if(o_bt))
        tr_tc.mask_params.binarize_threshold = std::stod(o_bt->results()[0]);
      if (set_if(o_mr)) {
        if (tr_mask_red != "sum" && tr_mask_red != "mean")
          throw config_error("--mask-reduction must be sum or mean");
        tr_tc.mask_reduction = tr_mask_red == "mean" ? MaskReduction::Mean
                                                     : MaskReduction::Sum;
      }
      if (set_if(o_extra))
        tr_mc.extra_blocks = std::stoi(o_extra->results()[0]);
      if (set_if(o_input))
        tr_mc.input_size = std::stoi(o_input->results()[0]);
      if (set_if(o_wd)) tr_mc.width_div = std::stoi(o_wd->results()[0]);
      if (set_if(o_parts) || true) tr_mc.parts = parse_regions(tr_parts);
      if (set_if(o_agg)) tr_mc.agg = aggregation_from_name(tr_agg);
      tr_mc.validate();
      tr_tc.validate();
      return cmd_train(tr_data, tr_out, tr_mc, tr_tc, tr_init_trunk,
                       tr_resume);
    }
    if (ev->parsed())
      return cmd_eval(ev_ckpt, ev_data, ev_split, ev_grouping, ev_out,
                      ev_jobs);
    if (tm->parsed())
      return cmd_transfer_matrix(tm_ckpts, tm_data, tm_split, tm_out, tm_jobs);
    if (st->parsed()) return cmd_stats(st_data, st_out, st_opt);
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
