#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <set>

#include "partsdet/adam.hpp"
#include "partsdet/schedule.hpp"
#include "partsdet/trainer.hpp"

using namespace partsdet;

TEST_CASE("learning rate schedule hits the documented boundaries") {
  TrainConfig c;  // lr0 1e-4, drop every 10000 by 10, 40000 steps
  REQUIRE(lr_schedule(0, c) == Catch::Approx(1e-4).epsilon(1e-12));
  REQUIRE(lr_schedule(9999, c) == Catch::Approx(1e-4).epsilon(1e-12));
  REQUIRE(lr_schedule(10000, c) == Catch::Approx(1e-5).epsilon(1e-12));
  REQUIRE(lr_schedule(39999, c) == Catch::Approx(1e-7).epsilon(1e-12));
}

TEST_CASE("a 40k-step sweep emits exactly four distinct learning rates") {
  TrainConfig c;
  std::set<double> values;
  for (int64_t s = 0; s < 40000; ++s) values.insert(lr_schedule(s, c));
  REQUIRE(values.size() == 4);
  const std::vector<double> expect = {1e-7, 1e-6, 1e-5, 1e-4};
  size_t i = 0;
  for (double v : values) {
    REQUIRE(v == Catch::Approx(expect[i]).epsilon(1e-12));
    ++i;
  }
}

namespace {

ParamStore<double> scalar_store(double value) {
  ParamStore<double> ps;
  ps.add("theta", {1}).v[0] = value;
  return ps;
}

}  // namespace

TEST_CASE("adam leaves parameters unchanged for zero gradients") {
  ParamStore<double> params = scalar_store(1.25);
  ParamStore<double> grads = scalar_store(0.0);
  AdamState<double> st = AdamState<double>::init(params);
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  for (int i = 0; i < 5; ++i) adam_step<double>(params, grads, st, 0.1, cfg);
  REQUIRE(params.tensors[0].v[0] == 1.25);
}

TEST_CASE("adam minimizes a 1-D quadratic") {
  // f(theta) = theta^2, gradient 2 theta; 200 steps at lr 0.1 from theta=1
  ParamStore<double> params = scalar_store(1.0);
  AdamState<double> st = AdamState<double>::init(params);
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  for (int i = 0; i < 200; ++i) {
    ParamStore<double> grads = scalar_store(2.0 * params.tensors[0].v[0]);
    adam_step<double>(params, grads, st, 0.1, cfg);
  }
  REQUIRE(std::abs(params.tensors[0].v[0]) < 1e-2);
}

TEST_CASE("single adam step matches a scalar reference") {
  // g=1, zero moments, beta1=.928, beta2=.999, lr=1e-4, eps=1e-8
  ParamStore<double> params = scalar_store(0.5);
  ParamStore<double> grads = scalar_store(1.0);
  AdamState<double> st = AdamState<double>::init(params);
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  adam_step<double>(params, grads, st, 1e-4, cfg);

  // reference: m=(1-b1)*g, v=(1-b2)*g^2, mhat=m/(1-b1), vhat=v/(1-b2)
  const double mhat = 1.0, vhat = 1.0;
  const double expect = 0.5 - 1e-4 * mhat / (std::sqrt(vhat) + 1e-8);
  REQUIRE(params.tensors[0].v[0] == Catch::Approx(expect).epsilon(1e-15));
}

TEST_CASE("coupled weight decay enters the gradient") {
  ParamStore<double> params = scalar_store(2.0);
  ParamStore<double> grads = scalar_store(0.0);
  AdamState<double> st = AdamState<double>::init(params);
  AdamConfig cfg;
  cfg.weight_decay = 0.1;
  adam_step<double>(params, grads, st, 1e-2, cfg);
  // effective gradient = wd * theta = 0.2; bias-corrected step = lr * sign
  const double g = 0.2;
  const double expect = 2.0 - 1e-2 * g / (std::sqrt(g * g) + 1e-8);
  REQUIRE(params.tensors[0].v[0] == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("non-finite gradients abort with the offending group name") {
  ParamStore<double> params;
  params.add("branch/nose/sep1/pw", {2});
  ParamStore<double> grads = params.zeros_like();
  grads.tensors[0].v[1] = std::numeric_limits<double>::quiet_NaN();
  AdamState<double> st = AdamState<double>::init(params);
  try {
    adam_step<double>(params, grads, st, 1e-3, {});
    FAIL("expected training_error");
  } catch (const training_error& e) {
    REQUIRE(std::string(e.what()).find("branch/nose/sep1/pw") !=
            std::string::npos);
  }
}

TEST_CASE("train config validation and round trip") {
  TrainConfig c;
  c.steps = 2000;
  c.lr_drop_every = 2000;
  c.seed = 99;
  c.lambda = 5.0;
  REQUIRE_NOTHROW(c.validate());

  TrainConfig parsed;
  parse_train_config_text(train_config_to_text(c), parsed);
  REQUIRE(parsed.steps == c.steps);
  REQUIRE(parsed.lr0 == c.lr0);
  REQUIRE(parsed.seed == c.seed);
  REQUIRE(parsed.lambda == c.lambda);
  REQUIRE(parsed.mask_params.sigma == c.mask_params.sigma);

  TrainConfig bad = c;
  bad.lr_drop_every = 4000;  // > steps
  REQUIRE_THROWS_AS(bad.validate(), config_error);

  TrainConfig t;
  REQUIRE_THROWS_AS(parse_train_config_text("nonsense", t), config_error);
  REQUIRE_THROWS_AS(parse_train_config_text("unknown_key=1", t), config_error);
  REQUIRE_NOTHROW(parse_train_config_text("# comment\n steps=10 \n", t));
  REQUIRE(t.steps == 10);
}
