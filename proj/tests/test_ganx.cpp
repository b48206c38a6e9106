#include <doctest.h>

#include <cmath>

#include "patx/ganx.hpp"
#include "test_util.hpp"

using namespace patx;
using testutil::fill_uniform;

#include "gan_mocks.hpp"

using ganmocks::ShiftGen;
using ganmocks::ConstDisc;
using ganmocks::SeqDisc;
using ganmocks::ConstClassifier;

namespace {

Tensor<double> interior_image(int c, int h, int w, std::uint64_t seed) {
  Tensor<double> x({1, c, h, w});
  std::mt19937_64 rng(seed);
  fill_uniform(x, 0.15, 0.85, rng);
  return x;
}

}  // namespace

TEST_CASE("bce_loss values") {
  CHECK(gan::bce_loss(1, 1.0 - 1e-7) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(gan::bce_loss(1, 0.5) == doctest::Approx(std::log(2.0)));
  CHECK(gan::bce_loss(0, 0.5) == doctest::Approx(std::log(2.0)));
  CHECK(gan::bce_loss(0, 1.0) < 20.0);  // clamped away from the boundary
  CHECK_THROWS_AS(gan::bce_loss(2, 0.5), std::invalid_argument);
}

TEST_CASE("sim_loss values and shape check") {
  Tensor<double> x({3, 2, 2});
  Tensor<double> same = x;
  CHECK(gan::sim_loss(x, same) == doctest::Approx(0.0));

  Tensor<double> zeros({2, 2, 2});
  Tensor<double> ones = Tensor<double>::full({2, 2, 2}, 1.0);
  CHECK(gan::sim_loss(zeros, ones) == doctest::Approx(1.0));

  // half of the 12 elements differ by 0.5 -> mean 0.25
  Tensor<double> a({3, 2, 2});
  Tensor<double> b({3, 2, 2});
  for (std::size_t i = 0; i < 6; ++i) b[i] = 0.5;
  CHECK(gan::sim_loss(a, b) == doctest::Approx(0.25));

  Tensor<double> other({3, 2, 3});
  CHECK_THROWS_AS(gan::sim_loss(x, other), std::invalid_argument);

  // optional L2 route
  CHECK(gan::sim_loss(zeros, ones, true) == doctest::Approx(1.0));
  CHECK(gan::sim_loss(a, b, true) == doctest::Approx(0.125));
}

TEST_CASE("cyc_loss: identity pair, inverse pair, real networks") {
  Tensor<double> x = interior_image(3, 4, 4, 5);

  ShiftGen<double> id_minus{Polarity::minimizer, 0.0};
  ShiftGen<double> id_plus{Polarity::maximizer, 0.0};
  CHECK(gan::cyc_loss(id_minus, id_plus, x) == doctest::Approx(0.0));

  ShiftGen<double> up{Polarity::minimizer, 0.1};
  ShiftGen<double> down{Polarity::maximizer, -0.1};
  CHECK(gan::cyc_loss(up, down, x) == doctest::Approx(0.0));
  CHECK(gan::cyc_loss(up, down, x, true) == doctest::Approx(0.0));

  GeneratorConfig gcfg{3, 2, 1};
  Generator<double> wm(gcfg, Polarity::minimizer, 1);
  Generator<double> wp(gcfg, Polarity::maximizer, 2);
  Tensor<double> img = interior_image(3, 8, 8, 6);
  const double v = gan::cyc_loss(wm, wp, img);
  CHECK(v > 0.0);
  CHECK(std::isfinite(v));
}

TEST_CASE("adv_gen_loss against constant discriminators") {
  Tensor<double> x = interior_image(3, 4, 4, 7);
  ShiftGen<double> id{Polarity::maximizer, 0.0};
  ConstDisc<double> d;
  d.value = 1.0;
  CHECK(gan::adv_gen_loss(d, id, x) == doctest::Approx(0.0));
  d.value = 0.0;
  CHECK(gan::adv_gen_loss(d, id, x) == doctest::Approx(1.0));
  d.value = 0.5;
  CHECK(gan::adv_gen_loss(d, id, x) == doctest::Approx(0.25));
  // cross-entropy switch
  d.value = 0.5;
  CHECK(gan::adv_gen_loss(d, id, x, true) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("am_loss values and freeze guard") {
  Tensor<double> x = interior_image(3, 4, 4, 8);
  ShiftGen<double> id{Polarity::maximizer, 0.0};

  ConstClassifier<double> cls;
  cls.score = 1.0 - 1e-7;
  CHECK(gan::am_loss(1, cls, id, x) == doctest::Approx(0.0).epsilon(1e-6));
  cls.score = 0.5;
  CHECK(gan::am_loss(0, cls, id, x) == doctest::Approx(std::log(2.0)));
  cls.score = 0.84;
  CHECK(gan::am_loss(1, cls, id, x) == doctest::Approx(-std::log(0.84)));
  CHECK(gan::am_loss(1, cls, id, x) == doctest::Approx(0.1744).epsilon(1e-3));

  cls.is_frozen = false;
  CHECK_THROWS_AS(gan::am_loss(1, cls, id, x), std::invalid_argument);
  cls.is_frozen = true;
  CHECK_THROWS_AS(gan::am_loss(2, cls, id, x), std::invalid_argument);
}

TEST_CASE("generator_loss composes the trivial per-term cases") {
  Tensor<double> x = interior_image(3, 4, 4, 9);
  ShiftGen<double> w_self{Polarity::maximizer, 0.0};
  ShiftGen<double> w_other{Polarity::minimizer, 0.0};
  ConstDisc<double> d;
  d.pol = Polarity::maximizer;
  d.value = 1.0;
  ConstClassifier<double> cls;
  cls.score = 0.5;

  gan::GanTrainConfig cfg;
  cfg.lambda_am = 0.3;
  const auto lb = gan::generator_loss(x, 1, w_self, w_other, d, &cls, cfg);
  CHECK(lb.sim == doctest::Approx(0.0));
  CHECK(lb.cyc == doctest::Approx(0.0));
  CHECK(lb.adv == doctest::Approx(0.0));
  CHECK(lb.am == doctest::Approx(std::log(2.0)));
  CHECK(lb.total == doctest::Approx(0.3 * std::log(2.0)));
  CHECK(lb.total == doctest::Approx(0.2079).epsilon(1e-3));
}

TEST_CASE("generator_loss with lambda 0 is classifier-independent") {
  Tensor<double> x = interior_image(3, 4, 4, 10);
  ShiftGen<double> w_self{Polarity::maximizer, 0.02};
  ShiftGen<double> w_other{Polarity::minimizer, -0.01};
  ConstDisc<double> d;
  d.value = 0.7;
  ConstClassifier<double> cls_a, cls_b;
  cls_a.score = 0.9;
  cls_b.score = 0.1;

  gan::GanTrainConfig cfg;
  cfg.lambda_am = 0.0;
  const auto la = gan::generator_loss(x, 1, w_self, w_other, d, &cls_a, cfg);
  const auto lb = gan::generator_loss(x, 1, w_self, w_other, d, &cls_b, cfg);
  CHECK(la.total == doctest::Approx(lb.total));
  CHECK(la.am != lb.am);  // logged value differs, weighted contribution is zero
}

TEST_CASE("generator_loss breakdown recomposes within 1e-6 on real networks") {
  GeneratorConfig gcfg{3, 2, 1};
  DiscriminatorConfig dcfg{3, 2, {{3, 1}, {3, 1}}};
  Generator<double> wp(gcfg, Polarity::maximizer, 11);
  Generator<double> wm(gcfg, Polarity::minimizer, 12);
  PatchDiscriminator<double> dp(dcfg, Polarity::maximizer, 13);
  ScoreNet<double> cls(ScoreNetConfig{3, 3, 2}, 14);
  cls.freeze();

  gan::GanTrainConfig cfg;
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    Tensor<double> x = interior_image(3, 8, 8, seed);
    const auto lb = gan::generator_loss(x, 1, wp, wm, dp, &cls, cfg);
    const double recomposed =
        cfg.w_sim * lb.sim + cfg.w_cyc * lb.cyc + cfg.w_adv * lb.adv + cfg.lambda_am * lb.am;
    CHECK(std::fabs(lb.total - recomposed) <= 1e-6);
  }
}

TEST_CASE("generator_loss polarity checks") {
  GeneratorConfig gcfg{3, 2, 1};
  DiscriminatorConfig dcfg{3, 2, {{3, 1}, {3, 1}}};
  Generator<double> wp(gcfg, Polarity::maximizer, 1);
  Generator<double> wm(gcfg, Polarity::minimizer, 2);
  PatchDiscriminator<double> dp(dcfg, Polarity::maximizer, 3);
  PatchDiscriminator<double> dm(dcfg, Polarity::minimizer, 4);
  ScoreNet<double> cls(ScoreNetConfig{3, 3, 2}, 5);
  cls.freeze();
  Tensor<double> x = interior_image(3, 8, 8, 6);
  gan::GanTrainConfig cfg;

  CHECK_THROWS_AS(gan::generator_loss(x, 1, wm, wp, dm, &cls, cfg), std::invalid_argument);
  CHECK_THROWS_AS(gan::generator_loss(x, 1, wp, wm, dm, &cls, cfg), std::invalid_argument);
  CHECK_THROWS_AS(gan::generator_loss(x, 0, wm, wm, dm, &cls, cfg), std::invalid_argument);
  CHECK_NOTHROW(gan::generator_loss(x, 0, wm, wp, dm, &cls, cfg));

  ScoreNet<double> warm(ScoreNetConfig{3, 3, 2}, 7);  // not frozen
  CHECK_THROWS_AS(gan::generator_loss(x, 1, wp, wm, dp, &warm, cfg), std::invalid_argument);
}

TEST_CASE("polarity inversion reproduces the minimizer loss from its terms") {
  GeneratorConfig gcfg{3, 2, 1};
  DiscriminatorConfig dcfg{3, 2, {{3, 1}, {3, 1}}};
  Generator<double> wp(gcfg, Polarity::maximizer, 31);
  Generator<double> wm(gcfg, Polarity::minimizer, 32);
  PatchDiscriminator<double> dm(dcfg, Polarity::minimizer, 33);
  ScoreNet<double> cls(ScoreNetConfig{3, 3, 2}, 34);
  cls.freeze();
  Tensor<double> x = interior_image(3, 8, 8, 35);
  gan::GanTrainConfig cfg;

  const auto lb = gan::generator_loss(x, 0, wm, wp, dm, &cls, cfg);
  const double sim = gan::sim_loss(x, wm.forward(x));
  const double cyc = gan::cyc_loss(wm, wp, x);
  const double adv = gan::adv_gen_loss(dm, wm, x);
  const double am = gan::am_loss(0, cls, wm, x);
  CHECK(lb.sim == doctest::Approx(sim).epsilon(1e-10));
  CHECK(lb.cyc == doctest::Approx(cyc).epsilon(1e-10));
  CHECK(lb.adv == doctest::Approx(adv).epsilon(1e-10));
  CHECK(lb.am == doctest::Approx(am).epsilon(1e-10));
  CHECK(lb.total ==
        doctest::Approx(cfg.w_sim * sim + cfg.w_cyc * cyc + cfg.w_adv * adv +
                        cfg.lambda_am * am)
            .epsilon(1e-10));
}

TEST_CASE("lambda monotonicity at fixed parameters") {
  GeneratorConfig gcfg{3, 2, 1};
  DiscriminatorConfig dcfg{3, 2, {{3, 1}, {3, 1}}};
  Generator<double> wp(gcfg, Polarity::maximizer, 41);
  Generator<double> wm(gcfg, Polarity::minimizer, 42);
  PatchDiscriminator<double> dp(dcfg, Polarity::maximizer, 43);
  ScoreNet<double> cls(ScoreNetConfig{3, 3, 2}, 44);
  cls.freeze();
  Tensor<double> x = interior_image(3, 8, 8, 45);

  double prev = -1.0;
  for (double lam : {0.0, 0.1, 0.3, 0.7, 1.5}) {
    gan::GanTrainConfig cfg;
    cfg.lambda_am = lam;
    const auto lb = gan::generator_loss(x, 1, wp, wm, dp, &cls, cfg);
    CHECK(lb.total >= prev);
    prev = lb.total;
  }
}

TEST_CASE("discriminator_loss values and analytic lower bound") {
  Tensor<double> real = interior_image(3, 4, 4, 51);
  Tensor<double> fake = interior_image(3, 4, 4, 52);

  SeqDisc<double> perfect;
  perfect.outputs = {1.0 - 1e-7, 1e-7};
  CHECK(gan::discriminator_loss(perfect, real, fake) == doctest::Approx(0.0).epsilon(1e-5));

  ConstDisc<double> half;
  half.value = 0.5;
  CHECK(gan::discriminator_loss(half, real, fake) == doctest::Approx(2.0 * std::log(2.0)));

  // oracle: minimum of -ln p - ln(1-p) located by grid + refinement
  double best = 1e30, best_p = 0;
  for (int i = 1; i < 9999; ++i) {
    const double p = i / 10000.0;
    const double f = -std::log(p) - std::log(1.0 - p);
    if (f < best) {
      best = f;
      best_p = p;
    }
  }
  CHECK(best_p == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(best == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-6));

  // with real == fake, any discriminator sits at or above that bound
  DiscriminatorConfig dcfg{3, 2, {{3, 1}, {3, 1}}};
  PatchDiscriminator<double> d(dcfg, Polarity::maximizer, 53);
  CHECK(gan::discriminator_loss(d, real, real) >= best - 1e-9);
}

TEST_CASE("receptive_field of conv stacks") {
  CHECK(receptive_field(default_patchgan_stack()) == 70);
  CHECK(receptive_field({{3, 1}}) == 3);
  CHECK(receptive_field({{3, 1}, {3, 1}}) == 5);
  DiscriminatorConfig dcfg;
  PatchDiscriminator<float> d(dcfg, Polarity::maximizer, 1);
  CHECK(d.receptive_field() == 70);
}

TEST_CASE("discriminator output grid stays in (0,1)") {
  DiscriminatorConfig dcfg{3, 4, default_patchgan_stack()};
  PatchDiscriminator<float> d(dcfg, Polarity::maximizer, 9);
  Tensor<float> x({1, 3, 64, 64});
  std::mt19937_64 rng(10);
  fill_uniform(x, 0.0f, 1.0f, rng);
  Tensor<float> p = d.forward(x);
  CHECK(p.rank() == 4);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p[i] > 0.0f);
    CHECK(p[i] < 1.0f);
  }
}

TEST_CASE("generator gradient check against finite differences (tiny, double)") {
  GeneratorConfig gcfg{2, 2, 1};
  DiscriminatorConfig dcfg{2, 2, {{3, 1}, {3, 1}}};
  Generator<double> wp(gcfg, Polarity::maximizer, 61);
  Generator<double> wm(gcfg, Polarity::minimizer, 62);
  PatchDiscriminator<double> dp(dcfg, Polarity::maximizer, 63);
  ScoreNet<double> cls(ScoreNetConfig{2, 3, 2}, 64);
  cls.freeze();
  Tensor<double> x = interior_image(2, 8, 8, 65);

  gan::GanTrainConfig cfg;
  cfg.lambda_am = 0.3;

  auto loss = [&] {
    return gan::generator_loss(x, 1, wp, wm, dp, &cls, cfg, false).total;
  };

  auto params = wp.params();
  nn::zero_grads(params);
  auto other = wm.params();
  nn::zero_grads(other);
  gan::generator_loss(x, 1, wp, wm, dp, &cls, cfg, true);
  testutil::check_param_grads_fd(params, loss, 1e-6, 1e-4, 10);
  // the cycle term also reaches the other generator
  testutil::check_param_grads_fd(other, loss, 1e-6, 1e-4, 6);
}

TEST_CASE("generator preserves arbitrary input shapes") {
  GeneratorConfig gcfg{3, 2, 1};
  Generator<float> g(gcfg, Polarity::maximizer, 71);
  std::mt19937_64 rng(72);
  for (const auto [h, w] : {std::pair{64, 64}, {96, 96}, {256, 256}, {64, 96}}) {
    Tensor<float> x({1, 3, h, w});
    fill_uniform(x, 0.0f, 1.0f, rng);
    Tensor<float> y = g.forward(x);
    CHECK(y.shape() == x.shape());
    for (std::size_t i = 0; i < y.size(); i += 97) {
      CHECK(y[i] > 0.0f);
      CHECK(y[i] < 1.0f);
    }
  }
  Tensor<float> odd({1, 3, 30, 30});
  CHECK_THROWS_AS(g.forward(odd), std::invalid_argument);
}

namespace {

data::DatasetSplit gan_split(int per_class, std::uint64_t seed) {
  data::SynthConfig cfg;
  cfg.size = 32;
  cfg.samples_per_class = per_class;
  cfg.radius_min = 3;
  cfg.radius_max = 7;
  cfg.seed = seed;
  const auto samples = data::generate_synthetic_dataset(cfg);
  return data::split_dataset(samples, {0.7, 0.15, 0.15}, seed);
}

gan::GanTrainConfig tiny_gan_cfg() {
  gan::GanTrainConfig cfg;
  cfg.ngf = 4;
  cfg.ndf = 4;
  cfg.n_res = 1;
  cfg.pretrain_epochs = 1;
  cfg.main_epochs = 1;
  cfg.max_train_images = 6;
  return cfg;
}

std::uint32_t pair_checksum(gan::CycleGanPair& p) {
  return p.w_plus->checksum() ^ p.w_minus->checksum() ^ p.d_plus->checksum() ^
         p.d_minus->checksum();
}

}  // namespace

TEST_CASE("pretrain/train contracts: identity epochs, freeze requirements") {
  const auto split = gan_split(12, 81);
  auto cfg = tiny_gan_cfg();

  SUBCASE("pretrain_epochs = 0 leaves the pair unchanged") {
    cfg.pretrain_epochs = 0;
    auto pair = gan::make_cyclegan_pair(cfg, 3, 1);
    const auto before = pair_checksum(pair);
    const auto res = gan::pretrain_cyclegan(pair, split, cfg);
    CHECK(pair_checksum(pair) == before);
    CHECK(pair.pretrained);
    CHECK(res.recon_plus > 0.0);
    CHECK(std::isfinite(res.recon_plus));
  }

  SUBCASE("main_epochs = 0 leaves the pretrained pair unchanged") {
    auto pair = gan::make_cyclegan_pair(cfg, 3, 2);
    gan::pretrain_cyclegan(pair, split, cfg);
    const auto after_pre = pair_checksum(pair);
    cls::Model classifier = cls::build_classifier({3, 4, 3}, 3);
    classifier.freeze();
    cfg.main_epochs = 0;
    gan::train_cyclegan(pair, classifier, split, cfg);
    CHECK(pair_checksum(pair) == after_pre);
  }

  SUBCASE("unfrozen classifier and missing pretraining are rejected") {
    auto pair = gan::make_cyclegan_pair(cfg, 3, 4);
    cls::Model classifier = cls::build_classifier({3, 4, 3}, 5);
    CHECK_THROWS_AS(gan::train_cyclegan(pair, classifier, split, cfg), std::invalid_argument);
    classifier.freeze();
    CHECK_THROWS_AS(gan::train_cyclegan(pair, classifier, split, cfg), std::invalid_argument);
    cfg.skip_pretrain = true;
    CHECK_NOTHROW(gan::train_cyclegan(pair, classifier, split, cfg));
  }
}

TEST_CASE("one training epoch keeps the frozen classifier bit-identical") {
  const auto split = gan_split(10, 91);
  auto cfg = tiny_gan_cfg();
  auto pair = gan::make_cyclegan_pair(cfg, 3, 6);
  gan::pretrain_cyclegan(pair, split, cfg);

  cls::Model classifier = cls::build_classifier({3, 4, 3}, 7);
  classifier.freeze();
  const auto before = classifier.checksum();
  const auto res = gan::train_cyclegan(pair, classifier, split, cfg);
  CHECK(classifier.checksum() == before);
  REQUIRE(res.epoch_max.size() == 1);
  CHECK(std::isfinite(res.epoch_max[0].total));
  CHECK(std::isfinite(res.epoch_min[0].total));
}

TEST_CASE("generate_pair shape, determinism and checkpoint round trip") {
  auto cfg = tiny_gan_cfg();
  auto pair = gan::make_cyclegan_pair(cfg, 3, 8);
  data::Image img({3, 32, 32});
  std::mt19937_64 rng(9);
  fill_uniform(img, 0.0f, 1.0f, rng);

  const auto [xmax1, xmin1] = gan::generate_pair(pair, img);
  CHECK(xmax1.shape() == img.shape());
  CHECK(xmin1.shape() == img.shape());
  const auto [xmax2, xmin2] = gan::generate_pair(pair, img);
  CHECK(std::memcmp(xmax1.data(), xmax2.data(), xmax1.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(xmin1.data(), xmin2.data(), xmin1.size() * sizeof(float)) == 0);

  const auto dir = std::filesystem::temp_directory_path() / "patx_gan_ckpt";
  std::filesystem::remove_all(dir);
  pair.pretrained = true;
  gan::save_gan(dir, pair, cfg);
  auto loaded = gan::load_gan(dir);
  CHECK(loaded.pretrained);
  CHECK(loaded.w_plus->checksum() == pair.w_plus->checksum());
  CHECK(loaded.d_minus->checksum() == pair.d_minus->checksum());
  const auto [xmax3, xmin3] = gan::generate_pair(loaded, img);
  CHECK(std::memcmp(xmax1.data(), xmax3.data(), xmax1.size() * sizeof(float)) == 0);
}
