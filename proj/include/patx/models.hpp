#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "patx/nn.hpp"
#include "patx/rng.hpp"

namespace patx {

enum class Polarity { maximizer, minimizer };

inline const char* polarity_name(Polarity p) {
  return p == Polarity::maximizer ? "maximizer" : "minimizer";
}

struct ConvSpec {
  int ksize = 3;
  int stride = 1;
};

/// Receptive field of one output unit of a conv stack, walked back to front:
/// rf <- (rf - 1) * stride + ksize.
inline int receptive_field(const std::vector<ConvSpec>& stack) {
  int rf = 1;
  for (auto it = stack.rbegin(); it != stack.rend(); ++it)
    rf = (rf - 1) * it->stride + it->ksize;
  return rf;
}

/// The stack whose single-unit receptive field is 70x70 input pixels:
/// three stride-2 k4 convs followed by two stride-1 k4 convs.
inline std::vector<ConvSpec> default_patchgan_stack() {
  return {{4, 2}, {4, 2}, {4, 2}, {4, 1}, {4, 1}};
}

namespace detail {

template <typename T>
std::uint32_t checksum_params(const std::vector<nn::Param<T>*>& params) {
  std::uint32_t c = 0;
  for (const auto* p : params)
    c = crc32(p->value.data(), p->value.size() * sizeof(T), c);
  return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Single-score classification network: stride-2 conv stages, global average
// pooling, one sigmoid unit. Fully convolutional, so any input size that
// survives the downsampling stack is accepted.

struct ScoreNetConfig {
  int in_channels = 3;
  int base_width = 8;
  int depth = 4;
};

template <typename T>
class ScoreNet {
 public:
  ScoreNet(const ScoreNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.in_channels < 1) throw std::invalid_argument("ScoreNet: in_channels must be >= 1");
    if (cfg.depth < 1 || cfg.base_width < 1)
      throw std::invalid_argument("ScoreNet: depth and base_width must be >= 1");
    auto rng = make_rng(seed);
    int ch = cfg.in_channels;
    for (int i = 0; i < cfg.depth; ++i) {
      const int out = cfg.base_width << std::min(i, 4);
      features_.template emplace<nn::Conv2d<T>>(ch, out, 3, 2, 1, rng, nn::Init::he);
      features_.template emplace<nn::InstanceNorm2d<T>>(out);
      features_.template emplace<nn::ReLU<T>>();
      ch = out;
    }
    feat_channels_ = ch;
    head_ = std::make_unique<nn::Linear<T>>(ch, 1, rng, nn::Init::xavier);
    params_ = nn::params_of(features_);
    head_->collect_params(params_);
  }

  /// x: NCHW -> scores: N (each strictly inside (0,1)).
  Tensor<T> forward(const Tensor<T>& x) {
    if (x.rank() != 4) throw std::invalid_argument("ScoreNet: expected NCHW input");
    if (x.dim(1) != cfg_.in_channels)
      throw std::invalid_argument("ScoreNet: input has " + std::to_string(x.dim(1)) +
                                  " channels, model expects " +
                                  std::to_string(cfg_.in_channels));
    last_act_ = features_.forward(x);
    Tensor<T> pooled = gap_.forward(last_act_);
    Tensor<T> logits = head_->forward(pooled);
    Tensor<T> s = out_.forward(logits);
    Tensor<T> scores({s.dim(0)});
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = s[i];
    return scores;
  }

  /// gscores: N -> gradient w.r.t. the input of the last forward call.
  Tensor<T> backward(const Tensor<T>& gscores) {
    Tensor<T> g({gscores.dim(0), 1});
    for (std::size_t i = 0; i < gscores.size(); ++i) g[i] = gscores[i];
    Tensor<T> gl = out_.backward(g);
    Tensor<T> gp = head_->backward(gl);
    last_act_grad_ = gap_.backward(gp);
    return features_.backward(last_act_grad_);
  }

  /// Score of the last feature map alone; used by the CAM-style attribution
  /// path and its finite-difference checks.
  Tensor<T> head_forward(const Tensor<T>& act) {
    Tensor<T> pooled = gap_.forward(act);
    Tensor<T> logits = head_->forward(pooled);
    Tensor<T> s = out_.forward(logits);
    Tensor<T> scores({s.dim(0)});
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = s[i];
    return scores;
  }

  const Tensor<T>& last_stage_activation() const { return last_act_; }
  const Tensor<T>& last_stage_gradient() const { return last_act_grad_; }
  int feature_channels() const { return feat_channels_; }

  const ScoreNetConfig& config() const { return cfg_; }
  std::vector<nn::Param<T>*>& params() { return params_; }
  const std::vector<nn::Param<T>*>& params() const { return params_; }

  void freeze() {
    frozen_ = true;
    features_.set_param_grads(false);
    head_->param_grads = false;
  }
  bool frozen() const { return frozen_; }
  std::uint32_t checksum() const { return detail::checksum_params(params_); }

 private:
  ScoreNetConfig cfg_;
  nn::Sequential<T> features_;
  nn::GlobalAvgPool<T> gap_;
  std::unique_ptr<nn::Linear<T>> head_;
  nn::Sigmoid<T> out_;
  std::vector<nn::Param<T>*> params_;
  Tensor<T> last_act_, last_act_grad_;
  int feat_channels_ = 0;
  bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// ResNet-style generator: two stride-2 encoder stages, n_res residual blocks,
// two nearest-upsampling decoder stages, per-channel sigmoid output. Output
// shape equals input shape; requires spatial dims divisible by 4.

struct GeneratorConfig {
  int in_channels = 3;
  int ngf = 12;
  int n_res = 12;
};

template <typename T>
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, Polarity polarity, std::uint64_t seed)
      : cfg_(cfg), polarity_(polarity) {
    if (cfg.in_channels < 1 || cfg.ngf < 1 || cfg.n_res < 1)
      throw std::invalid_argument("Generator: channels, ngf and n_res must be >= 1");
    auto rng = make_rng(seed);
    const int g1 = cfg.ngf, g2 = 2 * cfg.ngf, g4 = 4 * cfg.ngf;
    body_.template emplace<nn::Conv2d<T>>(cfg.in_channels, g1, 7, 1, 3, rng);
    body_.template emplace<nn::InstanceNorm2d<T>>(g1);
    body_.template emplace<nn::ReLU<T>>();
    body_.template emplace<nn::Conv2d<T>>(g1, g2, 3, 2, 1, rng);
    body_.template emplace<nn::InstanceNorm2d<T>>(g2);
    body_.template emplace<nn::ReLU<T>>();
    body_.template emplace<nn::Conv2d<T>>(g2, g4, 3, 2, 1, rng);
    body_.template emplace<nn::InstanceNorm2d<T>>(g4);
    body_.template emplace<nn::ReLU<T>>();
    for (int i = 0; i < cfg.n_res; ++i) {
      auto block = std::make_unique<nn::Sequential<T>>();
      block->template emplace<nn::Conv2d<T>>(g4, g4, 3, 1, 1, rng);
      block->template emplace<nn::InstanceNorm2d<T>>(g4);
      block->template emplace<nn::ReLU<T>>();
      block->template emplace<nn::Conv2d<T>>(g4, g4, 3, 1, 1, rng);
      block->template emplace<nn::InstanceNorm2d<T>>(g4);
      body_.template emplace<nn::ResidualBlock<T>>(std::move(block));
    }
    body_.template emplace<nn::Upsample2xNearest<T>>();
    body_.template emplace<nn::Conv2d<T>>(g4, g2, 3, 1, 1, rng);
    body_.template emplace<nn::InstanceNorm2d<T>>(g2);
    body_.template emplace<nn::ReLU<T>>();
    body_.template emplace<nn::Upsample2xNearest<T>>();
    body_.template emplace<nn::Conv2d<T>>(g2, g1, 3, 1, 1, rng);
    body_.template emplace<nn::InstanceNorm2d<T>>(g1);
    body_.template emplace<nn::ReLU<T>>();
    body_.template emplace<nn::Conv2d<T>>(g1, cfg.in_channels, 7, 1, 3, rng,
                                          nn::Init::xavier);
    body_.template emplace<nn::Sigmoid<T>>();
    params_ = nn::params_of(body_);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.rank() != 4) throw std::invalid_argument("Generator: expected NCHW input");
    if (x.dim(1) != cfg_.in_channels)
      throw std::invalid_argument("Generator: input has " + std::to_string(x.dim(1)) +
                                  " channels, model expects " +
                                  std::to_string(cfg_.in_channels));
    if (x.dim(2) % 4 != 0 || x.dim(3) % 4 != 0)
      throw std::invalid_argument("Generator: spatial dims must be divisible by 4, got " +
                                  x.shape_str());
    return body_.forward(x);
  }

  Tensor<T> backward(const Tensor<T>& gy) { return body_.backward(gy); }

  Polarity polarity() const { return polarity_; }
  const GeneratorConfig& config() const { return cfg_; }
  std::vector<nn::Param<T>*>& params() { return params_; }
  const std::vector<nn::Param<T>*>& params() const { return params_; }

  void set_param_grads(bool enabled) { body_.set_param_grads(enabled); }
  std::uint32_t checksum() const { return detail::checksum_params(params_); }

 private:
  GeneratorConfig cfg_;
  Polarity polarity_;
  nn::Sequential<T> body_;
  std::vector<nn::Param<T>*> params_;
};

// ---------------------------------------------------------------------------
// Fully convolutional patch discriminator. The conv stack is configurable so
// tiny test instances exist; the default stack scores 70x70 patches.

struct DiscriminatorConfig {
  int in_channels = 3;
  int ndf = 12;
  std::vector<ConvSpec> stack = default_patchgan_stack();
};

template <typename T>
class PatchDiscriminator {
 public:
  PatchDiscriminator(const DiscriminatorConfig& cfg, Polarity polarity, std::uint64_t seed)
      : cfg_(cfg), polarity_(polarity) {
    if (cfg.stack.empty()) throw std::invalid_argument("PatchDiscriminator: empty conv stack");
    auto rng = make_rng(seed);
    int ch = cfg.in_channels;
    const int n = static_cast<int>(cfg.stack.size());
    for (int i = 0; i < n; ++i) {
      const auto& spec = cfg.stack[static_cast<std::size_t>(i)];
      const bool last = i == n - 1;
      const int out = last ? 1 : cfg.ndf * std::min(1 << i, 4);
      body_.template emplace<nn::Conv2d<T>>(ch, out, spec.ksize, spec.stride, 1, rng,
                                            last ? nn::Init::xavier : nn::Init::he);
      if (last) {
        body_.template emplace<nn::Sigmoid<T>>();
      } else {
        if (i > 0) body_.template emplace<nn::InstanceNorm2d<T>>(out);
        body_.template emplace<nn::LeakyReLU<T>>(T(0.2));
      }
      ch = out;
    }
    params_ = nn::params_of(body_);
  }

  /// x: NCHW -> patch score grid N x 1 x Hp x Wp, values in (0,1).
  Tensor<T> forward(const Tensor<T>& x) { return body_.forward(x); }
  Tensor<T> backward(const Tensor<T>& gy) { return body_.backward(gy); }

  int receptive_field() const { return patx::receptive_field(cfg_.stack); }

  Polarity polarity() const { return polarity_; }
  const DiscriminatorConfig& config() const { return cfg_; }
  std::vector<nn::Param<T>*>& params() { return params_; }
  const std::vector<nn::Param<T>*>& params() const { return params_; }

  void set_param_grads(bool enabled) { body_.set_param_grads(enabled); }
  std::uint32_t checksum() const { return detail::checksum_params(params_); }

 private:
  DiscriminatorConfig cfg_;
  Polarity polarity_;
  nn::Sequential<T> body_;
  std::vector<nn::Param<T>*> params_;
};

}  // namespace patx
