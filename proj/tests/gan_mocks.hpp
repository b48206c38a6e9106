#pragma once

#include <deque>
#include <vector>

#include "patx/models.hpp"
#include "patx/tensor.hpp"

// Minimal stand-ins for the closed-form loss-term cases: identity/shift
// generators, constant discriminators, fixed-score classifiers.
namespace ganmocks {

template <typename T>
struct ShiftGen {  // adds a constant; identity when delta == 0
  patx::Polarity pol = patx::Polarity::maximizer;
  T delta = T(0);
  patx::Polarity polarity() const { return pol; }
  patx::Tensor<T> forward(const patx::Tensor<T>& x) {
    patx::Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += delta;
    return y;
  }
  patx::Tensor<T> backward(const patx::Tensor<T>& gy) { return gy; }
  void set_param_grads(bool) {}
};

template <typename T>
struct ConstDisc {  // constant patch grid
  patx::Polarity pol = patx::Polarity::maximizer;
  T value = T(0.5);
  std::vector<int> in_shape;
  patx::Polarity polarity() const { return pol; }
  patx::Tensor<T> forward(const patx::Tensor<T>& x) {
    in_shape = x.shape();
    return patx::Tensor<T>::full({x.dim(0), 1, 2, 2}, value);
  }
  patx::Tensor<T> backward(const patx::Tensor<T>&) { return patx::Tensor<T>(in_shape); }
  void set_param_grads(bool) {}
};

template <typename T>
struct SeqDisc {  // scripted outputs, one per forward call
  std::deque<T> outputs;
  patx::Tensor<T> forward(const patx::Tensor<T>& x) {
    const T v = outputs.front();
    outputs.pop_front();
    return patx::Tensor<T>::full({x.dim(0), 1, 2, 2}, v);
  }
};

template <typename T>
struct ConstClassifier {  // fixed score
  T score = T(0.5);
  bool is_frozen = true;
  std::vector<int> in_shape;
  bool frozen() const { return is_frozen; }
  patx::Tensor<T> forward(const patx::Tensor<T>& x) {
    in_shape = x.shape();
    return patx::Tensor<T>::full({x.dim(0)}, score);
  }
  patx::Tensor<T> backward(const patx::Tensor<T>&) { return patx::Tensor<T>(in_shape); }
};

}  // namespace ganmocks
