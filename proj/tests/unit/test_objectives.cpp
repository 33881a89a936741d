#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "partsdet/objectives.hpp"
#include "partsdet/rng.hpp"

using namespace partsdet;

TEST_CASE("mask loss analytic values") {
  SECTION("zero logits against a zero 2x2 target give 4 ln 2") {
    Grid<double> z(2, 2, 0.0);
    GridF t(2, 2, 0.f);
    REQUIRE(mask_loss<double>(z, t) ==
            Catch::Approx(4.0 * std::log(2.0)).margin(1e-12));
  }
  SECTION("saturated logits against an all-ones target are ~8.2e-9") {
    Grid<double> z(2, 2, 20.0);
    GridF t(2, 2, 1.f);
    REQUIRE(mask_loss<double>(z, t) ==
            Catch::Approx(4.0 * std::log1p(std::exp(-20.0))).epsilon(1e-9));
    REQUIRE(mask_loss<double>(z, t) == Catch::Approx(8.2446e-9).epsilon(1e-3));
  }
  SECTION("random 3x3 matches the direct per-pixel formula to 1e-12") {
    Rng rng(4);
    Grid<double> z(3, 3);
    GridF t(3, 3);
    for (auto& v : z.v) v = rng.uniform(-6, 6);
    for (auto& v : t.v) v = float(rng.uniform01());
    double direct = 0;
    for (size_t i = 0; i < z.v.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-z.v[i]));
      direct += -(double(t.v[i]) * std::log(s) +
                  (1.0 - t.v[i]) * std::log(1.0 - s));
    }
    REQUIRE(mask_loss<double>(z, t) ==
            Catch::Approx(direct).epsilon(1e-12));
  }
  SECTION("shape mismatch is rejected") {
    REQUIRE_THROWS_AS(mask_loss<double>(Grid<double>(2, 2), GridF(3, 3)),
                      input_error);
  }
  SECTION("mean reduction divides by the pixel count") {
    Grid<double> z(4, 4, 0.0);
    GridF t(4, 4, 0.f);
    REQUIRE(mask_loss<double>(z, t, MaskReduction::Mean) ==
            Catch::Approx(std::log(2.0)).margin(1e-12));
  }
}

TEST_CASE("class loss analytic values") {
  REQUIRE(class_loss<double>(0.0, 1) ==
          Catch::Approx(std::log(2.0)).margin(1e-12));
  REQUIRE(class_loss<double>(20.0, 1) ==
          Catch::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const double yhat = rng.uniform(-8, 8);
    const int y = rng.uniform01() < 0.5 ? 0 : 1;
    const double s = 1.0 / (1.0 + std::exp(-yhat));
    const double direct = -(y * std::log(s) + (1 - y) * std::log(1 - s));
    REQUIRE(class_loss<double>(yhat, y) == Catch::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("classification pathway") {
  auto maps_from = [](std::vector<double> pooled) {
    std::vector<Grid<double>> maps;
    for (double v : pooled) maps.push_back(Grid<double>(2, 2, v));
    return maps;
  };
  SECTION("pooled [2,4,6,8]: mean aggregates to 5, max to 8") {
    const auto maps = maps_from({2, 4, 6, 8});
    const auto mean =
        classify<double>(maps, Aggregation::Mean, {1.0}, {0.0});
    REQUIRE(mean.aggregate == Catch::Approx(5.0));
    const auto mx = classify<double>(maps, Aggregation::Max, {1.0}, {0.0});
    REQUIRE(mx.aggregate == Catch::Approx(8.0));
    REQUIRE(mx.argmax_part == 3);
  }
  SECTION("single part with unit classifier is the identity pathway") {
    const auto maps = maps_from({3.25});
    const auto pred =
        classify<double>(maps, Aggregation::Mean, {1.0}, {0.0});
    REQUIRE(pred.yhat == Catch::Approx(3.25));
    REQUIRE(pred.score == Catch::Approx(1.0 / (1.0 + std::exp(-3.25))));
  }
  SECTION("fc mode equals the dot-product oracle") {
    Rng rng(6);
    const std::vector<double> pooled = {0.5, -1.5, 2.0, 0.25};
    const std::vector<double> w = {rng.normal(), rng.normal(), rng.normal(),
                                   rng.normal()};
    const double b = rng.normal();
    const auto pred =
        classify<double>(maps_from(pooled), Aggregation::Fc, w, {b});
    double dot = b;
    for (int i = 0; i < 4; ++i) dot += w[i] * pooled[i];
    REQUIRE(pred.yhat == Catch::Approx(dot).epsilon(1e-12));
  }
  SECTION("ensemble averages per-member logits") {
    const auto pred = classify<double>(maps_from({1.0, 3.0}),
                                       Aggregation::Ensemble, {2.0, 1.0},
                                       {0.5, -0.5});
    REQUIRE(pred.yhat == Catch::Approx(0.5 * ((2.0 + 0.5) + (3.0 - 0.5))));
  }
  SECTION("part/classifier mismatch is a config error") {
    REQUIRE_THROWS_AS(
        classify<double>(maps_from({1, 2}), Aggregation::Fc, {1.0}, {0.0}),
        config_error);
  }
  SECTION("pooled values are spatial means") {
    Grid<double> g(2, 2);
    g.v = {1.0, 2.0, 3.0, 6.0};
    const auto pred =
        classify<double>({g}, Aggregation::Mean, {1.0}, {0.0});
    REQUIRE(pred.pooled[0] == Catch::Approx(3.0));
  }
}

TEST_CASE("mean aggregation equals the spatial mean of concatenated maps") {
  Rng rng(8);
  std::vector<Grid<double>> maps;
  double concat_sum = 0;
  size_t concat_n = 0;
  for (int p = 0; p < 4; ++p) {
    Grid<double> g(3, 3);
    for (auto& v : g.v) {
      v = rng.uniform(-2, 2);
      concat_sum += v;
      ++concat_n;
    }
    maps.push_back(std::move(g));
  }
  const auto pred = classify<double>(maps, Aggregation::Mean, {1.0}, {0.0});
  REQUIRE(pred.aggregate ==
          Catch::Approx(concat_sum / double(concat_n)).epsilon(1e-12));
}

TEST_CASE("total loss composition") {
  const std::vector<RegionId> parts = {RegionId::Nose};
  SECTION("real image, zero logits, one 2x2 part, lambda 10") {
    std::vector<Grid<double>> maps = {Grid<double>(2, 2, 0.0)};
    const RegionMaskSet targets = zero_mask_set(2, 2);
    const auto lb = total_loss<double>(maps, parts, targets, 0.0, 0, 10.0);
    REQUIRE(lb.total ==
            Catch::Approx(41.0 * std::log(2.0)).margin(1e-9));  // ln2 + 40 ln2
    REQUIRE(lb.total == Catch::Approx(28.4190).epsilon(1e-4));
  }
  SECTION("lambda 0 reduces to the class loss") {
    std::vector<Grid<double>> maps = {Grid<double>(2, 2, 1.5)};
    const auto lb = total_loss<double>(maps, parts, zero_mask_set(2, 2), -0.7,
                                       1, 0.0);
    REQUIRE(lb.total == Catch::Approx(class_loss<double>(-0.7, 1)));
  }
  SECTION("four-part total equals class plus ten times the mask sum") {
    Rng rng(9);
    const std::vector<RegionId> all(kAllRegions.begin(), kAllRegions.end());
    std::vector<Grid<double>> maps;
    RegionMaskSet targets = zero_mask_set(3, 3);
    for (int p = 0; p < 4; ++p) {
      Grid<double> g(3, 3);
      for (auto& v : g.v) v = rng.uniform(-4, 4);
      maps.push_back(std::move(g));
      for (auto& v : targets.masks[p].v) v = float(rng.uniform01());
    }
    const double yhat = rng.uniform(-3, 3);
    const auto lb = total_loss<double>(maps, all, targets, yhat, 1, 10.0);
    double expect = class_loss<double>(yhat, 1);
    for (int p = 0; p < 4; ++p)
      expect += 10.0 * mask_loss<double>(maps[p], targets.masks[p]);
    REQUIRE(lb.total == Catch::Approx(expect).epsilon(1e-12));
    REQUIRE(lb.mask_losses.size() == 4);
  }
  SECTION("losses are non-negative") {
    Rng rng(10);
    for (int trial = 0; trial < 30; ++trial) {
      Grid<double> g(2, 3);
      GridF t(2, 3);
      for (auto& v : g.v) v = rng.uniform(-10, 10);
      for (auto& v : t.v) v = float(rng.uniform01());
      REQUIRE(mask_loss<double>(g, t) >= 0.0);
      REQUIRE(class_loss<double>(rng.uniform(-10, 10),
                                 rng.uniform01() < 0.5 ? 0 : 1) >= 0.0);
    }
  }
}

TEST_CASE("real-image teaching signal pushes map logits down") {
  // y = 0, all-zero target, logits at 0: the gradient of the total loss with
  // respect to every map logit must be strictly positive.
  const std::vector<RegionId> parts = {RegionId::Nose, RegionId::Mouth};
  std::vector<Grid<double>> maps = {Grid<double>(3, 3, 0.0),
                                    Grid<double>(3, 3, 0.0)};
  const RegionMaskSet targets = zero_mask_set(3, 3);
  const double lambda = 10.0;

  const auto pred = classify<double>(maps, Aggregation::Mean, {1.0}, {0.0});
  const double dyhat = class_loss_grad<double>(pred.yhat, 0);
  std::vector<Grid<double>> dmaps = {Grid<double>(3, 3, 0.0),
                                     Grid<double>(3, 3, 0.0)};
  for (size_t p = 0; p < maps.size(); ++p) {
    Grid<double> g = mask_loss_grad<double>(maps[p], targets.masks[p]);
    for (size_t i = 0; i < g.v.size(); ++i) dmaps[p].v[i] += lambda * g.v[i];
  }
  std::vector<double> dw(1, 0.0), db(1, 0.0);
  classify_backward<double>(maps, pred, Aggregation::Mean, {1.0}, dyhat, dw,
                            db, dmaps);
  for (const auto& g : dmaps)
    for (double v : g.v) REQUIRE(v > 0.0);
}
