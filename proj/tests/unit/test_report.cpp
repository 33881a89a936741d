#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "partsdet/evaluate.hpp"
#include "partsdet/image_io.hpp"
#include "partsdet/synth.hpp"

using namespace partsdet;
namespace fs = std::filesystem;

namespace {

TransferReport golden_fixture() {
  TransferReport rep;
  auto cell = [](const std::string& train, const std::string& eval,
                 const std::string& model, double a, double ba, bool in_dist) {
    TransferCell c;
    c.train_split = train;
    c.eval_split = eval;
    c.model_name = model;
    c.grouping = "video";
    c.auc = a;
    c.balanced_accuracy = ba;
    c.n_videos = 30;
    c.n_frames = 120;
    c.in_distribution = in_dist;
    return c;
  };
  rep.cells.push_back(cell("eyes", "eyes", "Eyes", 0.93, 0.88, true));
  rep.cells.push_back(cell("eyes", "mouth", "Eyes", 0.48, 0.50, false));
  rep.cells.push_back(cell("mouth", "eyes", "Mouth", 0.52, 0.50, false));
  rep.cells.push_back(cell("mouth", "mouth", "Mouth", 0.95, 0.90, true));
  return rep;
}

std::string data_file(const std::string& name) {
  return read_text(std::string(TESTS_DATA_DIR) + "/" + name);
}

}  // namespace

TEST_CASE("markdown rendering matches the golden fixture") {
  REQUIRE(render_report_markdown(golden_fixture()) ==
          data_file("report_golden.md"));
}

TEST_CASE("csv rendering matches the golden fixture and round trips") {
  const TransferReport rep = golden_fixture();
  const std::string csv = render_report_csv(rep);
  REQUIRE(csv == data_file("report_golden.csv"));

  const TransferReport parsed = parse_report_csv(csv);
  REQUIRE(render_report_csv(parsed) == csv);
  REQUIRE(render_report_markdown(parsed) == data_file("report_golden.md"));
}

TEST_CASE("empty report renders a header-only csv") {
  REQUIRE(render_report_csv(TransferReport{}) ==
          "train_split,eval_split,model_name,grouping,auc,balanced_accuracy,"
          "n_videos,n_frames,in_distribution\n");
  REQUIRE(render_report_markdown(TransferReport{}).empty());
}

TEST_CASE("canonical row and column ordering") {
  REQUIRE(detail::split_rank("DF") < detail::split_rank("F2F"));
  REQUIRE(detail::split_rank("F2F") < detail::split_rank("FS"));
  REQUIRE(detail::split_rank("FS") < detail::split_rank("NT"));
  REQUIRE(detail::split_rank("NT") < detail::split_rank("synthetic"));
  REQUIRE(detail::model_rank("Nose") < detail::model_rank("Mouth"));
  REQUIRE(detail::model_rank("Chin") < detail::model_rank("Eyes+Chin"));
  REQUIRE(detail::model_rank("Eyes+Chin") < detail::model_rank("Combined"));
}

TEST_CASE("a 1x1 transfer grid equals the evaluate+auc composition") {
  SynthConfig cfg;
  cfg.n_videos = 6;
  cfg.frames_per_video = 2;
  cfg.artifact_regions = {RegionId::Mouth};
  cfg.seed = 3;
  cfg.train_fraction = 0.0;
  cfg.val_fraction = 0.0;  // everything lands in test
  const fs::path dir = fs::temp_directory_path() / "pd_report_1x1";
  fs::remove_all(dir);
  const DatasetManifest m = synth_generate(cfg, dir.string());

  ModelConfig mc;
  mc.parts = {RegionId::Mouth};
  mc.extra_blocks = 1;
  mc.input_size = 96;
  mc.width_div = 8;
  const Model<float> model = build_model<float>(mc, 77);

  EvalOptions opt;
  opt.jobs = 1;
  const double direct = auc(evaluate(model, m, Grouping::Video, opt));

  const TransferReport rep = transfer_matrix({{"s", &model}}, {{"s", &m}}, opt);
  double cell_auc = -1;
  for (const auto& c : rep.cells)
    if (c.grouping == "video") cell_auc = c.auc;
  REQUIRE(cell_auc == Catch::Approx(direct).margin(1e-15));

  // determinism: re-evaluation is bit-identical
  const ScoreSet again = evaluate(model, m, Grouping::Video, opt);
  REQUIRE(auc(again) == direct);
  fs::remove_all(dir);
}

TEST_CASE("frame and video grouping coincide for single-frame videos") {
  SynthConfig cfg;
  cfg.n_videos = 5;
  cfg.frames_per_video = 1;
  cfg.artifact_regions = {RegionId::Eyes};
  cfg.seed = 4;
  cfg.train_fraction = 0.0;
  cfg.val_fraction = 0.0;
  const fs::path dir = fs::temp_directory_path() / "pd_report_single";
  fs::remove_all(dir);
  const DatasetManifest m = synth_generate(cfg, dir.string());

  ModelConfig mc;
  mc.parts = {RegionId::Eyes};
  mc.extra_blocks = 1;
  mc.input_size = 96;
  mc.width_div = 8;
  const Model<float> model = build_model<float>(mc, 5);
  EvalOptions opt;
  opt.jobs = 1;
  const ScoreSet f = evaluate(model, m, Grouping::Frame, opt);
  const ScoreSet v = evaluate(model, m, Grouping::Video, opt);
  REQUIRE(f.size() == v.size());
  auto fs_sorted = f.scores, vs_sorted = v.scores;
  std::sort(fs_sorted.begin(), fs_sorted.end());
  std::sort(vs_sorted.begin(), vs_sorted.end());
  REQUIRE(fs_sorted == vs_sorted);
}

TEST_CASE("evaluating an empty split is a metric error") {
  SynthConfig cfg;
  cfg.n_videos = 2;
  cfg.frames_per_video = 1;
  cfg.artifact_regions = {RegionId::Mouth};
  cfg.seed = 8;
  cfg.train_fraction = 1.0;
  cfg.val_fraction = 0.0;  // no test split
  const fs::path dir = fs::temp_directory_path() / "pd_report_empty";
  fs::remove_all(dir);
  const DatasetManifest m = synth_generate(cfg, dir.string());
  ModelConfig mc;
  mc.parts = {RegionId::Mouth};
  mc.input_size = 96;
  mc.width_div = 8;
  const Model<float> model = build_model<float>(mc, 1);
  REQUIRE_THROWS_AS(evaluate(model, m, Grouping::Video, {}), metric_error);
  fs::remove_all(dir);
}
