#include <doctest.h>

#include "patx/config.hpp"

using namespace patx;
using nlohmann::json;

TEST_CASE("defaults validate and derive distinct phase seeds") {
  RunConfig cfg = default_run_config();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.synth.seed != cfg.classifier.seed);
  CHECK(cfg.classifier.seed != cfg.gan.seed);

  RunConfig again = default_run_config();
  CHECK(cfg.synth.seed == again.synth.seed);  // derivation is deterministic
}

TEST_CASE("unknown keys are rejected at every level") {
  json top = {{"seed", 1}, {"bogus", 2}};
  CHECK_THROWS_WITH_AS(parse_run_config(top), doctest::Contains("bogus"),
                       std::invalid_argument);

  json nested = {{"classifier", {{"max_lr", 0.01}, {"learning_rate", 0.1}}}};
  CHECK_THROWS_WITH_AS(parse_run_config(nested), doctest::Contains("learning_rate"),
                       std::invalid_argument);

  json deep = {{"evaluation", {{"occlusion", {{"patch", 4}}}}}};
  CHECK_THROWS_AS(parse_run_config(deep), std::invalid_argument);
}

TEST_CASE("field validation catches bad values") {
  CHECK_THROWS_AS(parse_run_config({{"ratios", {0.5, 0.5, 0.5}}}), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config({{"classifier", {{"batch_size", 0}}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config({{"gan", {{"lambda_am", -0.1}}}}), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config({{"attribution", {{"mode", "diff"}}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config({{"evaluation", {{"classes", {9}}}}}),
                  std::invalid_argument);
}

TEST_CASE("explicit values override defaults; round trip is stable") {
  json j;
  j["seed"] = 42;
  j["out_dir"] = "runs/x";
  j["gan"] = {{"lambda_am", 0.5}, {"n_res", 2}, {"seed", 777}};
  j["classifier"] = {{"epochs", 3}};
  j["attribution"] = {{"mode", "input-diff"}};
  const RunConfig cfg = parse_run_config(j);
  CHECK(cfg.seed == 42);
  CHECK(cfg.gan.lambda_am == 0.5);
  CHECK(cfg.gan.n_res == 2);
  CHECK(cfg.gan.seed == 777);  // explicit seed wins over derivation
  CHECK(cfg.classifier.epochs == 3);
  CHECK(cfg.attribution.mode == attr::Mode::input_diff);
  CHECK(cfg.classifier.seed != 0);  // derived

  const RunConfig cfg2 = parse_run_config(run_config_to_json(cfg));
  CHECK(cfg2.gan.lambda_am == cfg.gan.lambda_am);
  CHECK(cfg2.gan.seed == cfg.gan.seed);
  CHECK(cfg2.classifier.seed == cfg.classifier.seed);
  CHECK(cfg2.synth.seed == cfg.synth.seed);
  CHECK(run_config_to_json(cfg2) == run_config_to_json(cfg));
}

TEST_CASE("gan defaults match the published training settings") {
  const gan::GanTrainConfig g;
  CHECK(g.lambda_am == 0.3);
  CHECK(g.adam_beta1 == 0.5);
  CHECK(g.adam_beta2 == 0.999);
  CHECK(g.n_res == 12);
  CHECK(g.w_sim == 1.0);
  CHECK(g.w_cyc == 1.0);
  CHECK(g.w_adv == 1.0);

  const cls::ClassifierConfig c;
  CHECK(c.max_lr == 0.01);
  CHECK(c.weight_decay == 0.0001);
  CHECK(c.batch_size == 32);
  CHECK(c.input_channels == 3);
  CHECK(c.momentum == 0.0);
}
