#include <doctest.h>

#include <random>

#include "patx/nn.hpp"
#include "test_util.hpp"

using namespace patx;
using testutil::check_param_grads_fd;
using testutil::check_input_grad_fd;
using testutil::fill_uniform;

namespace {

// Scalar objective for gradient checks: weighted sum of outputs, weights
// fixed so the loss is a deterministic function of the layer output.
double weighted_sum(const Tensor<double>& y, const Tensor<double>& w) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

template <typename Layer>
void check_layer_grads(Layer& layer, Tensor<double>& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor<double> y0 = layer.forward(x);
  Tensor<double> w(y0.shape());
  fill_uniform(w, -1.0, 1.0, rng);

  auto loss = [&] { return weighted_sum(layer.forward(x), w); };

  std::vector<nn::Param<double>*> params;
  layer.collect_params(params);
  nn::zero_grads(params);
  layer.forward(x);
  Tensor<double> gx = layer.backward(w);
  if (!params.empty()) check_param_grads_fd(params, loss);
  check_input_grad_fd(x, gx, loss);
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
  std::mt19937_64 rng(7);
  for (int stride : {1, 2}) {
    nn::Conv2d<double> conv(3, 4, 3, stride, 1, rng);
    Tensor<double> x({2, 3, 6, 6});
    fill_uniform(x, -1.0, 1.0, rng);
    check_layer_grads(conv, x, 11);
  }
}

TEST_CASE("conv2d rejects wrong channel counts and degenerate sizes") {
  std::mt19937_64 rng(7);
  nn::Conv2d<double> conv(3, 4, 3, 2, 1, rng);
  Tensor<double> bad({1, 5, 8, 8});
  CHECK_THROWS_AS(conv.forward(bad), std::invalid_argument);
  nn::Conv2d<double> big(1, 1, 7, 1, 0, rng);
  Tensor<double> tiny({1, 1, 3, 3});
  CHECK_THROWS_AS(big.forward(tiny), std::invalid_argument);
}

TEST_CASE("instance norm gradients match finite differences") {
  std::mt19937_64 rng(9);
  nn::InstanceNorm2d<double> norm(3);
  std::vector<nn::Param<double>*> params;
  norm.collect_params(params);
  fill_uniform(params[0]->value, 0.5, 1.5, rng);  // gamma
  fill_uniform(params[1]->value, -0.3, 0.3, rng); // beta
  Tensor<double> x({2, 3, 5, 4});
  fill_uniform(x, -2.0, 2.0, rng);
  check_layer_grads(norm, x, 13);
}

TEST_CASE("linear / pool / activation stack gradients match finite differences") {
  std::mt19937_64 rng(17);
  nn::Sequential<double> net;
  net.emplace<nn::Conv2d<double>>(2, 3, 3, 1, 1, rng);
  net.emplace<nn::LeakyReLU<double>>(0.2);
  net.emplace<nn::Upsample2xNearest<double>>();
  net.emplace<nn::Conv2d<double>>(3, 2, 3, 2, 1, rng);
  net.emplace<nn::ReLU<double>>();
  Tensor<double> x({1, 2, 4, 4});
  fill_uniform(x, 0.1, 1.0, rng);
  check_layer_grads(net, x, 19);
}

TEST_CASE("sigmoid layer gradient and output range") {
  std::mt19937_64 rng(23);
  nn::Sigmoid<double> sig;
  Tensor<double> x({1, 2, 3, 3});
  fill_uniform(x, -3.0, 3.0, rng);
  Tensor<double> y = sig.forward(x);
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(y[i] > 0.0);
    CHECK(y[i] < 1.0);
  }
  check_layer_grads(sig, x, 29);
}

TEST_CASE("residual block preserves shape and gradients") {
  std::mt19937_64 rng(31);
  auto body = std::make_unique<nn::Sequential<double>>();
  body->emplace<nn::Conv2d<double>>(3, 3, 3, 1, 1, rng);
  body->emplace<nn::InstanceNorm2d<double>>(3);
  body->emplace<nn::ReLU<double>>();
  body->emplace<nn::Conv2d<double>>(3, 3, 3, 1, 1, rng);
  nn::ResidualBlock<double> block(std::move(body));
  Tensor<double> x({1, 3, 4, 4});
  fill_uniform(x, -1.0, 1.0, rng);
  CHECK(block.forward(x).shape() == x.shape());
  check_layer_grads(block, x, 37);
}

TEST_CASE("global average pool computes per-channel means") {
  nn::GlobalAvgPool<double> gap;
  Tensor<double> x({1, 2, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) x[i] = static_cast<double>(i + 1);  // mean 2.5
  for (std::size_t i = 4; i < 8; ++i) x[i] = 3.0;
  Tensor<double> y = gap.forward(x);
  CHECK(y[0] == doctest::Approx(2.5));
  CHECK(y[1] == doctest::Approx(3.0));
}

TEST_CASE("frozen layers skip parameter gradients but relay input gradients") {
  std::mt19937_64 rng(41);
  nn::Conv2d<double> conv(2, 2, 3, 1, 1, rng);
  conv.param_grads = false;
  Tensor<double> x({1, 2, 4, 4});
  fill_uniform(x, -1.0, 1.0, rng);
  Tensor<double> y = conv.forward(x);
  Tensor<double> gy(y.shape());
  fill_uniform(gy, -1.0, 1.0, rng);
  Tensor<double> gx = conv.backward(gy);
  std::vector<nn::Param<double>*> params;
  conv.collect_params(params);
  for (auto* p : params)
    for (std::size_t i = 0; i < p->grad.size(); ++i) CHECK(p->grad[i] == 0.0);
  double norm = 0;
  for (std::size_t i = 0; i < gx.size(); ++i) norm += std::fabs(gx[i]);
  CHECK(norm > 0.0);
}
