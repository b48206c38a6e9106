#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "patx/kernels.hpp"
#include "patx/tensor.hpp"

namespace patx::nn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void init_grad() { grad = Tensor<T>(value.shape()); }
};

/// Layer protocol: forward caches whatever backward needs, backward consumes
/// the most recent forward's cache. Training therefore serializes per layer;
/// a frozen network with param_grads disabled still produces input gradients.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& gy) = 0;
  virtual void collect_params(std::vector<Param<T>*>& out) { (void)out; }

  bool param_grads = true;
};

enum class Init { he, xavier };

template <typename T>
void fill_normal(Tensor<T>& t, T stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
}

// -------------------------------------------------------------------------
// im2col / col2im

template <typename T>
void im2col(const T* x, int c_in, int h, int w, int k, int stride, int pad, int ho, int wo,
            T* col) {
  const int m = ho * wo;
  for (int c = 0; c < c_in; ++c) {
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        T* crow = col + static_cast<std::size_t>((c * k + kh) * k + kw) * m;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + kh;
          T* dst = crow + static_cast<std::size_t>(oh) * wo;
          if (ih < 0 || ih >= h) {
            for (int ow = 0; ow < wo; ++ow) dst[ow] = T(0);
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * h + ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kw;
            dst[ow] = (iw >= 0 && iw < w) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int c_in, int h, int w, int k, int stride, int pad, int ho, int wo,
            T* x) {
  const int m = ho * wo;
  for (int c = 0; c < c_in; ++c) {
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        const T* crow = col + static_cast<std::size_t>((c * k + kh) * k + kw) * m;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= h) continue;
          const T* src = crow + static_cast<std::size_t>(oh) * wo;
          T* dst = x + (static_cast<std::size_t>(c) * h + ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kw;
            if (iw >= 0 && iw < w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

// -------------------------------------------------------------------------

template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, std::mt19937_64& rng,
         Init init = Init::he)
      : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), pad_(pad) {
    if (in_ch < 1 || out_ch < 1) throw std::invalid_argument("Conv2d: channels must be >= 1");
    w_.name = "w";
    w_.value = Tensor<T>({out_ch, in_ch, ksize, ksize});
    const double fan_in = static_cast<double>(in_ch) * ksize * ksize;
    const double fan_out = static_cast<double>(out_ch) * ksize * ksize;
    const double stddev =
        init == Init::he ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out));
    fill_normal(w_.value, static_cast<T>(stddev), rng);
    w_.init_grad();
    b_.name = "b";
    b_.value = Tensor<T>({out_ch});
    b_.init_grad();
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    check_input(x);
    x_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const auto [ho, wo] = out_hw(h, w);
    const int kk = in_ch_ * k_ * k_;
    const int m = ho * wo;
    Tensor<T> y({n, out_ch_, ho, wo});
    col_ = Tensor<T>({kk, m});
    for (int i = 0; i < n; ++i) {
      const T* xi = x.data() + static_cast<std::size_t>(i) * in_ch_ * h * w;
      T* yi = y.data() + static_cast<std::size_t>(i) * out_ch_ * m;
      im2col(xi, in_ch_, h, w, k_, stride_, pad_, ho, wo, col_.data());
      kernels::gemm_nn<T>(out_ch_, m, kk, T(1), w_.value.data(), kk, col_.data(), m, T(0), yi,
                          m);
      for (int c = 0; c < out_ch_; ++c) {
        const T bias = b_.value[c];
        T* row = yi + static_cast<std::size_t>(c) * m;
        for (int j = 0; j < m; ++j) row[j] += bias;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const auto [ho, wo] = out_hw(h, w);
    const int kk = in_ch_ * k_ * k_;
    const int m = ho * wo;
    Tensor<T> gx(x_.shape());
    Tensor<T> gcol({kk, m});
    for (int i = 0; i < n; ++i) {
      const T* gyi = gy.data() + static_cast<std::size_t>(i) * out_ch_ * m;
      if (this->param_grads) {
        const T* xi = x_.data() + static_cast<std::size_t>(i) * in_ch_ * h * w;
        im2col(xi, in_ch_, h, w, k_, stride_, pad_, ho, wo, col_.data());
        kernels::gemm_nt<T>(out_ch_, kk, m, T(1), gyi, m, col_.data(), m, T(1),
                            w_.grad.data(), kk);
        for (int c = 0; c < out_ch_; ++c) {
          const T* row = gyi + static_cast<std::size_t>(c) * m;
          T s = T(0);
          for (int j = 0; j < m; ++j) s += row[j];
          b_.grad[c] += s;
        }
      }
      kernels::gemm_tn<T>(kk, m, out_ch_, T(1), w_.value.data(), kk, gyi, m, T(0), gcol.data(),
                          m);
      T* gxi = gx.data() + static_cast<std::size_t>(i) * in_ch_ * h * w;
      col2im(gcol.data(), in_ch_, h, w, k_, stride_, pad_, ho, wo, gxi);
    }
    return gx;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&w_);
    out.push_back(&b_);
  }

  int out_channels() const { return out_ch_; }
  int ksize() const { return k_; }
  int stride() const { return stride_; }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 4) throw std::invalid_argument("Conv2d: expected NCHW input");
    if (x.dim(1) != in_ch_)
      throw std::invalid_argument("Conv2d: input has " + std::to_string(x.dim(1)) +
                                  " channels, layer expects " + std::to_string(in_ch_));
    const auto [ho, wo] = out_hw(x.dim(2), x.dim(3));
    if (ho < 1 || wo < 1)
      throw std::invalid_argument("Conv2d: input " + x.shape_str() + " too small for k=" +
                                  std::to_string(k_) + " s=" + std::to_string(stride_));
  }

  std::pair<int, int> out_hw(int h, int w) const {
    return {(h + 2 * pad_ - k_) / stride_ + 1, (w + 2 * pad_ - k_) / stride_ + 1};
  }

  int in_ch_, out_ch_, k_, stride_, pad_;
  Param<T> w_, b_;
  Tensor<T> x_;
  Tensor<T> col_;
};

// Per-sample, per-channel normalization with affine scale/shift. Stats are
// recomputed at every call, so evaluation is deterministic with no train/eval
// mode split.
template <typename T>
class InstanceNorm2d : public Layer<T> {
 public:
  explicit InstanceNorm2d(int channels, T eps = T(1e-5)) : c_(channels), eps_(eps) {
    gamma_.name = "gamma";
    gamma_.value = Tensor<T>::full({channels}, T(1));
    gamma_.init_grad();
    beta_.name = "beta";
    beta_.value = Tensor<T>({channels});
    beta_.init_grad();
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int m = h * w;
    passthrough_ = m == 1;  // stats are undefined on a single spatial element
    if (passthrough_) return x;
    xhat_ = Tensor<T>(x.shape());
    istd_ = Tensor<T>({n, c_});
    Tensor<T> y(x.shape());
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < c_; ++c) {
        const std::size_t off = (static_cast<std::size_t>(i) * c_ + c) * m;
        const T* src = x.data() + off;
        T mean = T(0);
        for (int j = 0; j < m; ++j) mean += src[j];
        mean /= static_cast<T>(m);
        T var = T(0);
        for (int j = 0; j < m; ++j) {
          const T d = src[j] - mean;
          var += d * d;
        }
        var /= static_cast<T>(m);
        const T istd = T(1) / std::sqrt(var + eps_);
        istd_[static_cast<std::size_t>(i) * c_ + c] = istd;
        const T g = gamma_.value[c], bb = beta_.value[c];
        T* xh = xhat_.data() + off;
        T* dst = y.data() + off;
        for (int j = 0; j < m; ++j) {
          xh[j] = (src[j] - mean) * istd;
          dst[j] = g * xh[j] + bb;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    if (passthrough_) return gy;
    const int n = gy.dim(0), h = gy.dim(2), w = gy.dim(3);
    const int m = h * w;
    Tensor<T> gx(gy.shape());
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < c_; ++c) {
        const std::size_t off = (static_cast<std::size_t>(i) * c_ + c) * m;
        const T* g = gy.data() + off;
        const T* xh = xhat_.data() + off;
        T sum_g = T(0), sum_gx = T(0);
        for (int j = 0; j < m; ++j) {
          sum_g += g[j];
          sum_gx += g[j] * xh[j];
        }
        if (this->param_grads) {
          gamma_.grad[c] += sum_gx;
          beta_.grad[c] += sum_g;
        }
        const T gm = sum_g / static_cast<T>(m);
        const T gxm = sum_gx / static_cast<T>(m);
        const T scale = gamma_.value[c] * istd_[static_cast<std::size_t>(i) * c_ + c];
        T* dst = gx.data() + off;
        for (int j = 0; j < m; ++j) dst[j] = scale * (g[j] - gm - xh[j] * gxm);
      }
    }
    return gx;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

 private:
  int c_;
  T eps_;
  Param<T> gamma_, beta_;
  Tensor<T> xhat_, istd_;
  bool passthrough_ = false;
};

template <typename T>
class ReLU : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override {
    x_ = x;
    Tensor<T> y(x.shape());
    kernels::relu<T>(x.size(), x.data(), y.data());
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> gx(gy.shape());
    kernels::relu_grad<T>(gy.size(), x_.data(), gy.data(), gx.data());
    return gx;
  }

 private:
  Tensor<T> x_;
};

template <typename T>
class LeakyReLU : public Layer<T> {
 public:
  explicit LeakyReLU(T slope = T(0.2)) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& x) override {
    x_ = x;
    Tensor<T> y(x.shape());
    kernels::lrelu<T>(x.size(), slope_, x.data(), y.data());
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> gx(gy.shape());
    kernels::lrelu_grad<T>(gy.size(), slope_, x_.data(), gy.data(), gx.data());
    return gx;
  }

 private:
  T slope_;
  Tensor<T> x_;
};

// Output squashed to the open interval (eps, 1-eps); downstream code relies on
// strictly-interior values for the cross-entropy terms.
template <typename T>
inline constexpr T kSigmoidClamp = T(1e-6);

template <typename T>
inline T sigmoid_clamped(T x) {
  T y;
  if (x >= T(0)) {
    y = T(1) / (T(1) + std::exp(-x));
  } else {
    const T e = std::exp(x);
    y = e / (T(1) + e);
  }
  const T lo = kSigmoidClamp<T>, hi = T(1) - kSigmoidClamp<T>;
  return y < lo ? lo : (y > hi ? hi : y);
}

template <typename T>
class Sigmoid : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override {
    y_ = Tensor<T>(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y_[i] = sigmoid_clamped(x[i]);
    return y_;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> gx(gy.shape());
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * y_[i] * (T(1) - y_[i]);
    return gx;
  }

 private:
  Tensor<T> y_;
};

template <typename T>
class Upsample2xNearest : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    in_shape_ = x.shape();
    Tensor<T> y({n, c, 2 * h, 2 * w});
    for (int i = 0; i < n * c; ++i) {
      const T* src = x.data() + static_cast<std::size_t>(i) * h * w;
      T* dst = y.data() + static_cast<std::size_t>(i) * 4 * h * w;
      for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
          const T v = src[r * w + col];
          T* d = dst + (2 * r) * (2 * w) + 2 * col;
          d[0] = v;
          d[1] = v;
          d[2 * w] = v;
          d[2 * w + 1] = v;
        }
      }
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    Tensor<T> gx(in_shape_);
    for (int i = 0; i < n * c; ++i) {
      const T* src = gy.data() + static_cast<std::size_t>(i) * 4 * h * w;
      T* dst = gx.data() + static_cast<std::size_t>(i) * h * w;
      for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
          const T* s = src + (2 * r) * (2 * w) + 2 * col;
          dst[r * w + col] = s[0] + s[1] + s[2 * w] + s[2 * w + 1];
        }
      }
    }
    return gx;
  }

 private:
  std::vector<int> in_shape_;
};

template <typename T>
class GlobalAvgPool : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    in_shape_ = x.shape();
    Tensor<T> y({n, c});
    const T inv = T(1) / static_cast<T>(h * w);
    for (int i = 0; i < n * c; ++i) {
      const T* src = x.data() + static_cast<std::size_t>(i) * h * w;
      T s = T(0);
      for (int j = 0; j < h * w; ++j) s += src[j];
      y[i] = s * inv;
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    const int h = in_shape_[2], w = in_shape_[3];
    Tensor<T> gx(in_shape_);
    const T inv = T(1) / static_cast<T>(h * w);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      T* dst = gx.data() + i * h * w;
      const T v = gy[i] * inv;
      for (int j = 0; j < h * w; ++j) dst[j] = v;
    }
    return gx;
  }

 private:
  std::vector<int> in_shape_;
};

template <typename T>
class Linear : public Layer<T> {
 public:
  Linear(int in_dim, int out_dim, std::mt19937_64& rng, Init init = Init::xavier)
      : in_(in_dim), out_(out_dim) {
    w_.name = "w";
    w_.value = Tensor<T>({out_dim, in_dim});
    const double stddev = init == Init::he ? std::sqrt(2.0 / in_dim)
                                           : std::sqrt(2.0 / (in_dim + out_dim));
    fill_normal(w_.value, static_cast<T>(stddev), rng);
    w_.init_grad();
    b_.name = "b";
    b_.value = Tensor<T>({out_dim});
    b_.init_grad();
  }

  Tensor<T> forward(const Tensor<T>& x) override {
    if (x.dim(1) != in_) throw std::invalid_argument("Linear: dimension mismatch");
    x_ = x;
    const int n = x.dim(0);
    Tensor<T> y({n, out_});
    kernels::gemm_nt<T>(n, out_, in_, T(1), x.data(), in_, w_.value.data(), in_, T(0),
                        y.data(), out_);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < out_; ++c) y[static_cast<std::size_t>(i) * out_ + c] += b_.value[c];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    const int n = x_.dim(0);
    if (this->param_grads) {
      kernels::gemm_tn<T>(out_, in_, n, T(1), gy.data(), out_, x_.data(), in_, T(1),
                          w_.grad.data(), in_);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < out_; ++c) b_.grad[c] += gy[static_cast<std::size_t>(i) * out_ + c];
    }
    Tensor<T> gx({n, in_});
    kernels::gemm_nn<T>(n, in_, out_, T(1), gy.data(), out_, w_.value.data(), in_, T(0),
                        gx.data(), in_);
    return gx;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    out.push_back(&w_);
    out.push_back(&b_);
  }

 private:
  int in_, out_;
  Param<T> w_, b_;
  Tensor<T> x_;
};

template <typename T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;

  template <typename L, typename... Args>
  L* emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> cur = x;
    for (auto& l : layers_) cur = l->forward(cur);
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> cur = gy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
  }

  void collect_params(std::vector<Param<T>*>& out) override {
    for (auto& l : layers_) l->collect_params(out);
  }

  void set_param_grads(bool enabled) {
    this->param_grads = enabled;
    for (auto& l : layers_) l->param_grads = enabled;
  }

  std::size_t layer_count() const { return layers_.size(); }
  Layer<T>* layer(std::size_t i) { return layers_[i].get(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <typename T>
class ResidualBlock : public Layer<T> {
 public:
  explicit ResidualBlock(std::unique_ptr<Sequential<T>> body) : body_(std::move(body)) {}

  Tensor<T> forward(const Tensor<T>& x) override {
    Tensor<T> y = body_->forward(x);
    if (!y.same_shape(x)) throw std::logic_error("ResidualBlock: body must preserve shape");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> gx = body_->backward(gy);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    return gx;
  }

  void collect_params(std::vector<Param<T>*>& out) override { body_->collect_params(out); }

  Sequential<T>& body() { return *body_; }

 private:
  std::unique_ptr<Sequential<T>> body_;
};

// -------------------------------------------------------------------------
// Parameter utilities

template <typename T>
void zero_grads(std::vector<Param<T>*>& params) {
  for (auto* p : params) p->grad.fill(T(0));
}

template <typename T>
std::vector<Param<T>*> params_of(Layer<T>& net) {
  std::vector<Param<T>*> ps;
  net.collect_params(ps);
  return ps;
}

/// Plain gradient descent with decoupled weight decay and optional momentum.
template <typename T>
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Param<T>*> params, T weight_decay, T momentum = T(0))
      : params_(std::move(params)), wd_(weight_decay), momentum_(momentum) {
    if (momentum_ > T(0)) {
      velocity_.reserve(params_.size());
      for (auto* p : params_) velocity_.emplace_back(p->value.shape());
    }
  }

  void step(T lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<T>& p = *params_[i];
      const std::size_t n = p.value.size();
      if (momentum_ > T(0)) {
        Tensor<T>& u = velocity_[i];
        for (std::size_t j = 0; j < n; ++j) {
          u[j] = momentum_ * u[j] + p.grad[j];
          p.value[j] -= lr * (u[j] + wd_ * p.value[j]);
        }
      } else {
        for (std::size_t j = 0; j < n; ++j) p.value[j] -= lr * (p.grad[j] + wd_ * p.value[j]);
      }
    }
  }

  void zero_grads() { nn::zero_grads(params_); }

 private:
  std::vector<Param<T>*> params_;
  T wd_, momentum_;
  std::vector<Tensor<T>> velocity_;
};

template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Param<T>*> params, T lr, T beta1, T beta2, T eps = T(1e-8),
                T weight_decay = T(0))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        wd_(weight_decay) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void step() {
    ++t_;
    const T bc1 = T(1) / (T(1) - std::pow(beta1_, static_cast<T>(t_)));
    const T bc2 = T(1) / (T(1) - std::pow(beta2_, static_cast<T>(t_)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<T>& p = *params_[i];
      kernels::adam<T>(p.value.size(), p.value.data(), p.grad.data(), m_[i].data(),
                       v_[i].data(), lr_, beta1_, beta2_, eps_, bc1, bc2, wd_);
    }
  }

  void zero_grads() { nn::zero_grads(params_); }
  long step_count() const { return t_; }

 private:
  std::vector<Param<T>*> params_;
  T lr_, beta1_, beta2_, eps_, wd_;
  long t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace patx::nn
