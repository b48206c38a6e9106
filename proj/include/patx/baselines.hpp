#pragma once

#include <cstring>
#include <functional>
#include <vector>

#include "patx/attribution.hpp"
#include "patx/models.hpp"

namespace patx::baselines {

struct OcclusionConfig {
  int patch_size = 16;
  int stride = 8;
  float fill_value = 0.0f;

  void validate(int h, int w) const {
    if (stride < 1 || patch_size < stride)
      throw std::invalid_argument("occlusion: need 1 <= stride <= patch_size");
    if (patch_size > h || patch_size > w)
      throw std::invalid_argument("occlusion: patch larger than image");
    if (fill_value < 0.0f || fill_value > 1.0f)
      throw std::invalid_argument("occlusion: fill_value must lie in [0,1]");
  }
};

/// Scores a batch of C x H x W images stacked as N x C x H x W.
template <typename T>
using BatchScorer = std::function<std::vector<T>(const Tensor<T>&)>;

/// Occlusion sensitivity: slide a filled window over the image; the score
/// drop of each window is accumulated into the covered pixels, normalized by
/// coverage counts, negatives clamped, then max-normalized. Windows are
/// evaluated through the scorer in batches.
template <typename T>
attr::AttributionMapT<T> occlusion_map_fn(const BatchScorer<T>& score, const Tensor<T>& x,
                                          const OcclusionConfig& cfg, int batch_size = 32) {
  if (x.rank() != 3) throw std::invalid_argument("occlusion: expected C x H x W image");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  cfg.validate(h, w);

  Tensor<T> base({1, c, h, w});
  std::memcpy(base.data(), x.data(), x.size() * sizeof(T));
  const T base_score = score(base).at(0);

  std::vector<std::pair<int, int>> windows;
  for (int y = 0; y + cfg.patch_size <= h; y += cfg.stride)
    for (int xx = 0; xx + cfg.patch_size <= w; xx += cfg.stride) windows.emplace_back(y, xx);

  Tensor<T> acc({h, w});
  Tensor<T> count({h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  for (std::size_t off = 0; off < windows.size(); off += static_cast<std::size_t>(batch_size)) {
    const std::size_t take =
        std::min(windows.size() - off, static_cast<std::size_t>(batch_size));
    Tensor<T> batch({static_cast<int>(take), c, h, w});
    for (std::size_t i = 0; i < take; ++i) {
      T* dst = batch.data() + i * x.size();
      std::memcpy(dst, x.data(), x.size() * sizeof(T));
      const auto [wy, wx] = windows[off + i];
      for (int ch = 0; ch < c; ++ch)
        for (int y = wy; y < wy + cfg.patch_size; ++y) {
          T* row = dst + static_cast<std::size_t>(ch) * hw + static_cast<std::size_t>(y) * w;
          for (int xx = wx; xx < wx + cfg.patch_size; ++xx)
            row[xx] = static_cast<T>(cfg.fill_value);
        }
    }
    const std::vector<T> scores = score(batch);
    for (std::size_t i = 0; i < take; ++i) {
      const T delta = base_score - scores[i];
      const auto [wy, wx] = windows[off + i];
      for (int y = wy; y < wy + cfg.patch_size; ++y) {
        T* arow = acc.data() + static_cast<std::size_t>(y) * w;
        T* crow = count.data() + static_cast<std::size_t>(y) * w;
        for (int xx = wx; xx < wx + cfg.patch_size; ++xx) {
          arow[xx] += delta;
          crow[xx] += T(1);
        }
      }
    }
  }

  attr::AttributionMapT<T> out;
  out.values = Tensor<T>({h, w});
  for (std::size_t i = 0; i < hw; ++i) {
    const T v = count[i] > T(0) ? acc[i] / count[i] : T(0);
    out.values[i] = v > T(0) ? v : T(0);  // negatives clamped
  }
  attr::detail::max_normalize(out.values);
  out.mode = attr::Mode::pair_diff;
  out.source_hash_a = attr::image_hash(x);
  out.source_hash_b = out.source_hash_a;
  return out;
}

template <typename T>
attr::AttributionMapT<T> occlusion_map(ScoreNet<T>& classifier, const Tensor<T>& x,
                                       const OcclusionConfig& cfg) {
  if (!classifier.frozen())
    throw std::invalid_argument("occlusion_map: classifier must be frozen");
  BatchScorer<T> score = [&classifier](const Tensor<T>& batch) {
    Tensor<T> s = classifier.forward(batch);
    return std::vector<T>(s.data(), s.data() + s.size());
  };
  return occlusion_map_fn(score, x, cfg);
}

// ---------------------------------------------------------------------------
// CAM from an activation/gradient pair: channel weights are the spatial means
// of the score gradient; the weighted activation sum is rectified, bilinearly
// upsampled and max-normalized.

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& src, int out_h, int out_w) {
  const int h = src.dim(0), w = src.dim(1);
  Tensor<T> dst({out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::max(0.0, std::min(fy, static_cast<double>(h - 1)));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::max(0.0, std::min(fx, static_cast<double>(w - 1)));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - x0;
      const double v = (1 - ty) * ((1 - tx) * src[static_cast<std::size_t>(y0) * w + x0] +
                                   tx * src[static_cast<std::size_t>(y0) * w + x1]) +
                       ty * ((1 - tx) * src[static_cast<std::size_t>(y1) * w + x0] +
                             tx * src[static_cast<std::size_t>(y1) * w + x1]);
      dst[static_cast<std::size_t>(y) * out_w + x] = static_cast<T>(v);
    }
  }
  return dst;
}

/// act/grad: 1 x C x h x w activation of a conv stage and d(score)/d(act).
template <typename T>
Tensor<T> cam_from_activation(const Tensor<T>& act, const Tensor<T>& grad, int out_h,
                              int out_w) {
  if (!act.same_shape(grad))
    throw std::invalid_argument("cam: activation and gradient shapes differ");
  if (act.rank() != 4 || act.dim(0) != 1)
    throw std::invalid_argument("cam: expected a 1 x C x h x w spatial activation");
  const int c = act.dim(1), h = act.dim(2), w = act.dim(3);
  if (h < 1 || w < 1) throw std::invalid_argument("cam: layer has no spatial extent");
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  Tensor<T> cam({h, w});
  for (int ch = 0; ch < c; ++ch) {
    const T* g = grad.data() + static_cast<std::size_t>(ch) * hw;
    const T* a = act.data() + static_cast<std::size_t>(ch) * hw;
    T weight = T(0);
    for (std::size_t i = 0; i < hw; ++i) weight += g[i];
    weight /= static_cast<T>(hw);
    for (std::size_t i = 0; i < hw; ++i) cam[i] += weight * a[i];
  }
  for (std::size_t i = 0; i < hw; ++i) cam[i] = cam[i] > T(0) ? cam[i] : T(0);
  Tensor<T> up = bilinear_upsample(cam, out_h, out_w);
  attr::detail::max_normalize(up);
  return up;
}

/// GradCAM at the classifier's last convolutional stage.
template <typename T>
attr::AttributionMapT<T> gradcam(ScoreNet<T>& classifier, const Tensor<T>& x) {
  if (x.rank() != 3) throw std::invalid_argument("gradcam: expected C x H x W image");
  Tensor<T> batch({1, x.dim(0), x.dim(1), x.dim(2)});
  std::memcpy(batch.data(), x.data(), x.size() * sizeof(T));
  classifier.forward(batch);
  Tensor<T> gs({1});
  gs[0] = T(1);
  classifier.backward(gs);

  attr::AttributionMapT<T> out;
  out.values = cam_from_activation(classifier.last_stage_activation(),
                                   classifier.last_stage_gradient(), x.dim(1), x.dim(2));
  out.mode = attr::Mode::pair_diff;
  out.source_hash_a = attr::image_hash(x);
  out.source_hash_b = out.source_hash_a;
  return out;
}

}  // namespace patx::baselines
