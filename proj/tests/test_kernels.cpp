#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "patx/kernels.hpp"

using namespace patx;

namespace {

std::vector<float> random_vec(std::size_t n, std::mt19937_64& rng, float scale = 1.0f) {
  std::uniform_real_distribution<float> d(-scale, scale);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Relative-or-absolute closeness; FMA contraction makes bit equality too
// strict for the GEMM family.
void check_close(const std::vector<float>& a, const std::vector<float>& b, float rel = 5e-5f,
                 float abs_tol = 1e-5f) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float diff = std::fabs(a[i] - b[i]);
    const float bound = abs_tol + rel * std::max(std::fabs(a[i]), std::fabs(b[i]));
    if (diff > bound) {
      CAPTURE(i);
      CAPTURE(a[i]);
      CAPTURE(b[i]);
      REQUIRE(diff <= bound);
    }
  }
}

struct BackendGuard {
  kernels::Backend saved;
  BackendGuard() : saved(kernels::active_backend()) {}
  ~BackendGuard() { kernels::set_backend(saved); }
};

}  // namespace

TEST_CASE("gemm variants match the scalar reference on the active SIMD backend") {
  if (!kernels::cpu_has_avx2()) {
    MESSAGE("no AVX2 on this CPU; runtime dispatch already scalar");
    return;
  }
  BackendGuard guard;
  std::mt19937_64 rng(7);
  // Deliberately awkward sizes to cover every tail path.
  const int dims[][3] = {{1, 1, 1},   {3, 5, 2},    {4, 16, 8},   {5, 17, 9},
                         {12, 1024, 108}, {7, 33, 70}, {64, 49, 129}, {2, 2, 513}};
  for (const auto& d : dims) {
    const int m = d[0], n = d[1], k = d[2];
    auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
    auto b = random_vec(static_cast<std::size_t>(k) * n, rng);
    auto at = random_vec(static_cast<std::size_t>(k) * m, rng);
    auto bt = random_vec(static_cast<std::size_t>(n) * k, rng);
    auto c0 = random_vec(static_cast<std::size_t>(m) * n, rng);

    for (float beta : {0.0f, 1.0f, 0.5f}) {
      auto c_ref = c0, c_simd = c0;
      kernels::set_backend(kernels::Backend::scalar);
      kernels::sgemm_nn(m, n, k, 1.3f, a.data(), k, b.data(), n, beta, c_ref.data(), n);
      kernels::set_backend(kernels::Backend::avx2);
      kernels::sgemm_nn(m, n, k, 1.3f, a.data(), k, b.data(), n, beta, c_simd.data(), n);
      check_close(c_ref, c_simd);

      c_ref = c0;
      c_simd = c0;
      kernels::set_backend(kernels::Backend::scalar);
      kernels::sgemm_tn(m, n, k, 0.7f, at.data(), m, b.data(), n, beta, c_ref.data(), n);
      kernels::set_backend(kernels::Backend::avx2);
      kernels::sgemm_tn(m, n, k, 0.7f, at.data(), m, b.data(), n, beta, c_simd.data(), n);
      check_close(c_ref, c_simd);

      c_ref = c0;
      c_simd = c0;
      kernels::set_backend(kernels::Backend::scalar);
      kernels::sgemm_nt(m, n, k, -0.9f, a.data(), k, bt.data(), k, beta, c_ref.data(), n);
      kernels::set_backend(kernels::Backend::avx2);
      kernels::sgemm_nt(m, n, k, -0.9f, a.data(), k, bt.data(), k, beta, c_simd.data(), n);
      check_close(c_ref, c_simd);
    }
  }
}

TEST_CASE("elementwise kernels match the scalar reference") {
  if (!kernels::cpu_has_avx2()) return;
  BackendGuard guard;
  std::mt19937_64 rng(11);
  for (std::size_t n : {1u, 7u, 8u, 9u, 255u, 4096u}) {
    auto x = random_vec(n, rng);
    auto gy = random_vec(n, rng);
    auto y0 = random_vec(n, rng);

    auto run = [&](kernels::Backend bk) {
      kernels::set_backend(bk);
      struct Out {
        std::vector<float> axpy, relu, relu_g, lrelu, lrelu_g;
      } o;
      o.axpy = y0;
      kernels::saxpy(n, 0.37f, x.data(), o.axpy.data());
      o.relu.assign(n, 0.0f);
      kernels::srelu(n, x.data(), o.relu.data());
      o.relu_g = y0;
      kernels::srelu_grad(n, x.data(), gy.data(), o.relu_g.data());
      o.lrelu.assign(n, 0.0f);
      kernels::slrelu(n, 0.2f, x.data(), o.lrelu.data());
      o.lrelu_g = y0;
      kernels::slrelu_grad(n, 0.2f, x.data(), gy.data(), o.lrelu_g.data());
      return o;
    };
    auto ref = run(kernels::Backend::scalar);
    auto simd = run(kernels::Backend::avx2);
    check_close(ref.axpy, simd.axpy);
    check_close(ref.relu, simd.relu);
    check_close(ref.relu_g, simd.relu_g);
    check_close(ref.lrelu, simd.lrelu);
    check_close(ref.lrelu_g, simd.lrelu_g);
  }
}

TEST_CASE("adam kernel matches the scalar reference across steps") {
  if (!kernels::cpu_has_avx2()) return;
  BackendGuard guard;
  std::mt19937_64 rng(13);
  const std::size_t n = 133;
  auto p0 = random_vec(n, rng);
  auto run = [&](kernels::Backend bk) {
    kernels::set_backend(bk);
    auto p = p0;
    std::vector<float> m(n, 0.0f), v(n, 0.0f);
    std::mt19937_64 grng(5);
    for (int t = 1; t <= 5; ++t) {
      auto g = random_vec(n, grng);
      const float bc1 = 1.0f / (1.0f - std::pow(0.5f, static_cast<float>(t)));
      const float bc2 = 1.0f / (1.0f - std::pow(0.999f, static_cast<float>(t)));
      kernels::sadam(n, p.data(), g.data(), m.data(), v.data(), 2e-4f, 0.5f, 0.999f, 1e-8f,
                     bc1, bc2, 0.01f);
    }
    return p;
  };
  check_close(run(kernels::Backend::scalar), run(kernels::Backend::avx2), 1e-4f, 1e-6f);
}

TEST_CASE("backend selection reports and honors overrides") {
  BackendGuard guard;
  REQUIRE(kernels::set_backend(kernels::Backend::scalar));
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  if (kernels::cpu_has_avx2()) {
    REQUIRE(kernels::set_backend(kernels::Backend::avx2));
    CHECK(kernels::active_backend() == kernels::Backend::avx2);
  } else {
    CHECK_FALSE(kernels::set_backend(kernels::Backend::avx2));
  }
}
