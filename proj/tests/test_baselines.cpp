#include <doctest.h>

#include <cmath>
#include <functional>

#include "patx/baselines.hpp"
#include "test_util.hpp"

using namespace patx;
using testutil::fill_uniform;

namespace {

// Independent oracle: literal triple loop over window positions, one scored
// image at a time, then per-pixel normalization and clamping.
template <typename T>
Tensor<T> occlusion_oracle(const std::function<T(const Tensor<T>&)>& score_one,
                           const Tensor<T>& x, const baselines::OcclusionConfig& cfg) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const T base = score_one(x);
  Tensor<T> acc({h, w}), count({h, w});
  for (int wy = 0; wy + cfg.patch_size <= h; wy += cfg.stride) {
    for (int wx = 0; wx + cfg.patch_size <= w; wx += cfg.stride) {
      Tensor<T> occluded = x;
      for (int ch = 0; ch < c; ++ch)
        for (int y = wy; y < wy + cfg.patch_size; ++y)
          for (int xx = wx; xx < wx + cfg.patch_size; ++xx)
            occluded[(static_cast<std::size_t>(ch) * h + y) * w + xx] =
                static_cast<T>(cfg.fill_value);
      const T delta = base - score_one(occluded);
      for (int y = wy; y < wy + cfg.patch_size; ++y)
        for (int xx = wx; xx < wx + cfg.patch_size; ++xx) {
          acc[static_cast<std::size_t>(y) * w + xx] += delta;
          count[static_cast<std::size_t>(y) * w + xx] += T(1);
        }
    }
  }
  Tensor<T> out({h, w});
  T mx = T(0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = count[i] > T(0) ? acc[i] / count[i] : T(0);
    out[i] = v > T(0) ? v : T(0);
    mx = std::max(mx, out[i]);
  }
  if (mx > T(0))
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= mx;
  return out;
}

template <typename T>
baselines::BatchScorer<T> batch_of(const std::function<T(const Tensor<T>&)>& one) {
  return [one](const Tensor<T>& batch) {
    const int n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    std::vector<T> out;
    for (int i = 0; i < n; ++i) {
      Tensor<T> img({c, h, w});
      std::memcpy(img.data(), batch.data() + static_cast<std::size_t>(i) * img.size(),
                  img.size() * sizeof(T));
      out.push_back(one(img));
    }
    return out;
  };
}

}  // namespace

TEST_CASE("occlusion: constant scorer yields a zero map") {
  Tensor<double> x({1, 8, 8});
  std::mt19937_64 rng(1);
  fill_uniform(x, 0.0, 1.0, rng);
  std::function<double(const Tensor<double>&)> constant = [](const Tensor<double>&) {
    return 0.7;
  };
  const auto map =
      baselines::occlusion_map_fn<double>(batch_of(constant), x, {2, 1, 0.0f});
  for (std::size_t i = 0; i < map.values.size(); ++i) CHECK(map.values[i] == 0.0);
}

TEST_CASE("occlusion: single-pixel scorer concentrates attribution at the pixel") {
  Tensor<double> x({1, 8, 8});
  x.fill(0.5);
  const std::size_t target = 3 * 8 + 5;
  std::function<double(const Tensor<double>&)> pixel = [&](const Tensor<double>& img) {
    return img[target];
  };
  const baselines::OcclusionConfig cfg{1, 1, 0.0f};
  const auto map = baselines::occlusion_map_fn<double>(batch_of(pixel), x, cfg);
  const auto oracle = occlusion_oracle(pixel, x, cfg);
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    CHECK(std::fabs(map.values[i] - oracle[i]) <= 1e-9);
    CHECK(map.values[i] == (i == target ? 1.0 : 0.0));
  }
}

TEST_CASE("occlusion: window covering the whole image gives a uniform map") {
  Tensor<double> x({1, 8, 8});
  std::mt19937_64 rng(2);
  fill_uniform(x, 0.1, 0.9, rng);
  std::function<double(const Tensor<double>&)> mean = [](const Tensor<double>& img) {
    double s = 0;
    for (std::size_t i = 0; i < img.size(); ++i) s += img[i];
    return s / static_cast<double>(img.size());
  };
  const auto map = baselines::occlusion_map_fn<double>(batch_of(mean), x, {8, 8, 0.0f});
  for (std::size_t i = 0; i < map.values.size(); ++i)
    CHECK(map.values[i] == doctest::Approx(1.0));
}

TEST_CASE("occlusion: batched implementation equals the brute-force oracle within 1e-9") {
  ScoreNet<double> net(ScoreNetConfig{2, 3, 2}, 42);
  net.freeze();
  Tensor<double> x({2, 8, 8});
  std::mt19937_64 rng(3);
  fill_uniform(x, 0.0, 1.0, rng);

  std::function<double(const Tensor<double>&)> score_one = [&](const Tensor<double>& img) {
    Tensor<double> batch({1, img.dim(0), img.dim(1), img.dim(2)});
    std::memcpy(batch.data(), img.data(), img.size() * sizeof(double));
    return net.forward(batch)[0];
  };

  for (const auto cfg : {baselines::OcclusionConfig{2, 1, 0.0f},
                         baselines::OcclusionConfig{4, 2, 0.25f},
                         baselines::OcclusionConfig{3, 3, 0.0f}}) {
    const auto fast = baselines::occlusion_map(net, x, cfg);
    const auto slow = occlusion_oracle(score_one, x, cfg);
    for (std::size_t i = 0; i < fast.values.size(); ++i)
      CHECK(std::fabs(fast.values[i] - slow[i]) <= 1e-9);
  }
}

TEST_CASE("occlusion: validation errors") {
  ScoreNet<double> net(ScoreNetConfig{1, 2, 1}, 1);
  net.freeze();
  Tensor<double> x({1, 8, 8});
  CHECK_THROWS_AS(baselines::occlusion_map(net, x, {16, 8, 0.0f}), std::invalid_argument);
  CHECK_THROWS_AS(baselines::occlusion_map(net, x, {4, 5, 0.0f}), std::invalid_argument);
  ScoreNet<double> warm(ScoreNetConfig{1, 2, 1}, 2);
  CHECK_THROWS_AS(baselines::occlusion_map(warm, x, {2, 1, 0.0f}), std::invalid_argument);
}

TEST_CASE("cam localizes a one-hot activation through an identity head") {
  // hand case on a 4x4 activation: one active cell, gradient uniform -> the
  // upsampled rectified map peaks exactly at that cell
  Tensor<double> act({1, 1, 4, 4});
  act[2 * 4 + 1] = 1.0;  // row 2, col 1
  Tensor<double> grad = Tensor<double>::full({1, 1, 4, 4}, 0.25);
  const auto cam = baselines::cam_from_activation(act, grad, 4, 4);
  // weight = mean(grad) = 0.25 > 0; cam = 0.25 * act -> normalized one-hot
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      CHECK(cam[static_cast<std::size_t>(y) * 4 + x] ==
            doctest::Approx(y == 2 && x == 1 ? 1.0 : 0.0));

  // brute-force cross-check of the same case with channel-summed weights
  double weight = 0;
  for (std::size_t i = 0; i < grad.size(); ++i) weight += grad[i];
  weight /= 16.0;
  for (std::size_t i = 0; i < 16; ++i) {
    const double expect = std::max(0.0, weight * act[i]) / (weight * 1.0);
    CHECK(cam[i] == doctest::Approx(expect));
  }
}

TEST_CASE("gradcam: zero head weights give a zero map; outputs stay in [0,1]") {
  ScoreNet<double> net(ScoreNetConfig{3, 3, 2}, 7);
  // zero the linear head: score gradient w.r.t. activations vanishes
  auto& params = net.params();
  for (auto* p : params)
    if (p->name == "w" && p->value.rank() == 2) p->value.fill(0.0);
  Tensor<double> x({3, 16, 16});
  std::mt19937_64 rng(8);
  fill_uniform(x, 0.0, 1.0, rng);
  const auto zero = baselines::gradcam(net, x);
  for (std::size_t i = 0; i < zero.values.size(); ++i) CHECK(zero.values[i] == 0.0);

  ScoreNet<double> live(ScoreNetConfig{3, 3, 2}, 9);
  const auto map = baselines::gradcam(live, x);
  CHECK(map.values.shape() == std::vector<int>{16, 16});
  double mx = 0;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    CHECK(map.values[i] >= 0.0);
    CHECK(map.values[i] <= 1.0);
    mx = std::max(mx, map.values[i]);
  }
  CHECK(mx == 1.0);
}

TEST_CASE("gradcam channel weights match finite differences (tiny, double)") {
  ScoreNet<double> net(ScoreNetConfig{2, 3, 2}, 11);
  Tensor<double> x({1, 2, 8, 8});
  std::mt19937_64 rng(12);
  fill_uniform(x, 0.1, 0.9, rng);

  net.forward(x);
  Tensor<double> gs({1});
  gs[0] = 1.0;
  net.backward(gs);
  Tensor<double> act = net.last_stage_activation();
  const Tensor<double> grad = net.last_stage_gradient();

  const int c = act.dim(1), h = act.dim(2), w = act.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    double analytic = 0;
    for (std::size_t i = 0; i < hw; ++i)
      analytic += grad[static_cast<std::size_t>(ch) * hw + i];
    analytic /= static_cast<double>(hw);

    // finite differences through the head alone
    double fd = 0;
    const double h_step = 1e-6;
    for (std::size_t i = 0; i < hw; ++i) {
      const std::size_t idx = static_cast<std::size_t>(ch) * hw + i;
      const double saved = act[idx];
      act[idx] = saved + h_step;
      const double up = net.head_forward(act)[0];
      act[idx] = saved - h_step;
      const double down = net.head_forward(act)[0];
      act[idx] = saved;
      fd += (up - down) / (2.0 * h_step);
    }
    fd /= static_cast<double>(hw);
    CHECK(testutil::rel_err(analytic, fd) <= 1e-4);
  }
}
