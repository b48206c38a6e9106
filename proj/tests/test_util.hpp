#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <doctest.h>

#include "patx/nn.hpp"
#include "patx/tensor.hpp"

namespace testutil {

inline double rel_err(double got, double want) {
  const double denom = std::max({std::fabs(got), std::fabs(want), 1e-12});
  return std::fabs(got - want) / denom;
}

template <typename T>
void fill_uniform(patx::Tensor<T>& t, T lo, T hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(static_cast<double>(lo), static_cast<double>(hi));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(d(rng));
}

/// Central finite differences against analytic parameter gradients.
/// loss() must recompute the full objective; grads must already hold the
/// analytic gradient for the current parameter values.
inline void check_param_grads_fd(std::vector<patx::nn::Param<double>*> params,
                                 const std::function<double()>& loss, double h = 1e-6,
                                 double tol = 1e-4, std::size_t max_per_tensor = 24,
                                 double min_grad = 1e-8) {
  std::mt19937_64 pick(123);
  std::size_t checked = 0;
  for (auto* p : params) {
    const std::size_t n = p->value.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), pick);
    const std::size_t take = std::min(max_per_tensor, n);
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t i = idx[k];
      const double saved = p->value[i];
      const double step = h * std::max(1.0, std::fabs(saved));
      p->value[i] = saved + step;
      const double up = loss();
      p->value[i] = saved - step;
      const double down = loss();
      p->value[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = p->grad[i];
      if (std::fabs(fd) < min_grad && std::fabs(an) < min_grad) continue;
      ++checked;
      if (rel_err(an, fd) > tol) {
        CAPTURE(p->name);
        CAPTURE(i);
        CAPTURE(an);
        CAPTURE(fd);
        REQUIRE(rel_err(an, fd) <= tol);
      }
    }
  }
  REQUIRE(checked > 0);
}

/// Same check for the gradient with respect to an input tensor.
inline void check_input_grad_fd(patx::Tensor<double>& x, const patx::Tensor<double>& gx,
                                const std::function<double()>& loss, double h = 1e-6,
                                double tol = 1e-4, std::size_t max_checks = 48) {
  std::mt19937_64 pick(321);
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), pick);
  const std::size_t take = std::min(max_checks, x.size());
  std::size_t checked = 0;
  for (std::size_t k = 0; k < take; ++k) {
    const std::size_t i = idx[k];
    const double saved = x[i];
    const double step = h * std::max(1.0, std::fabs(saved));
    x[i] = saved + step;
    const double up = loss();
    x[i] = saved - step;
    const double down = loss();
    x[i] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double an = gx[i];
    if (std::fabs(fd) < 1e-8 && std::fabs(an) < 1e-8) continue;
    ++checked;
    if (rel_err(an, fd) > tol) {
      CAPTURE(i);
      CAPTURE(an);
      CAPTURE(fd);
      REQUIRE(rel_err(an, fd) <= tol);
    }
  }
  REQUIRE(checked > 0);
}

}  // namespace testutil
