#include <array>

#include "patx/kernels_ref.hpp"
#include "patx/kernels_table.hpp"
#include "patx/rng.hpp"

namespace patx::kernels {

namespace {

void gemm_nn_f(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
               int ldb, float beta, float* c, int ldc) {
  ref::gemm_nn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void gemm_tn_f(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
               int ldb, float beta, float* c, int ldc) {
  ref::gemm_tn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void gemm_nt_f(int m, int n, int k, float alpha, const float* a, int lda, const float* b,
               int ldb, float beta, float* c, int ldc) {
  ref::gemm_nt(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void axpy_f(std::size_t n, float a, const float* x, float* y) { ref::axpy(n, a, x, y); }
void relu_f(std::size_t n, const float* x, float* y) { ref::relu(n, x, y); }
void relu_grad_f(std::size_t n, const float* x, const float* gy, float* gx) {
  ref::relu_grad(n, x, gy, gx);
}
void lrelu_f(std::size_t n, float s, const float* x, float* y) { ref::lrelu(n, s, x, y); }
void lrelu_grad_f(std::size_t n, float s, const float* x, const float* gy, float* gx) {
  ref::lrelu_grad(n, s, x, gy, gx);
}
void adam_f(std::size_t n, float* p, const float* g, float* m, float* v, float lr, float b1,
            float b2, float eps, float bc1, float bc2, float wd) {
  ref::adam(n, p, g, m, v, lr, b1, b2, eps, bc1, bc2, wd);
}

}  // namespace

void fill_scalar_table(KernelTable& t) {
  t.gemm_nn = gemm_nn_f;
  t.gemm_tn = gemm_tn_f;
  t.gemm_nt = gemm_nt_f;
  t.axpy = axpy_f;
  t.relu = relu_f;
  t.relu_grad = relu_grad_f;
  t.lrelu = lrelu_f;
  t.lrelu_grad = lrelu_grad_f;
  t.adam = adam_f;
}

}  // namespace patx::kernels

namespace patx {

std::uint32_t crc32(const void* data, std::size_t n, std::uint32_t seed) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = seed ^ 0xffffffffu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) c = table[(c ^ p[i]) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

}  // namespace patx
