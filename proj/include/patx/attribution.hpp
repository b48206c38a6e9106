#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "patx/rng.hpp"
#include "patx/tensor.hpp"

namespace patx::attr {

enum class Mode { pair_diff, input_diff };

inline const char* mode_name(Mode m) { return m == Mode::pair_diff ? "pair-diff" : "input-diff"; }

Mode mode_from_name(const std::string& name);

/// H x W nonnegative importance map, max-normalized to [0,1] (identically
/// zero maps stay zero).
template <typename T>
struct AttributionMapT {
  Tensor<T> values;
  Mode mode = Mode::pair_diff;
  std::string source_hash_a, source_hash_b;
};

using AttributionMap = AttributionMapT<float>;

template <typename T>
std::string image_hash(const Tensor<T>& img) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(img.data(), img.size() * sizeof(T))));
  return buf;
}

namespace detail {

template <typename T>
Tensor<T> mean_abs_channel_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("attribution: images must have identical shapes");
  if (a.rank() != 3) throw std::invalid_argument("attribution: expected C x H x W images");
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  Tensor<T> m({h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    const T* pa = a.data() + static_cast<std::size_t>(ch) * hw;
    const T* pb = b.data() + static_cast<std::size_t>(ch) * hw;
    for (std::size_t i = 0; i < hw; ++i) m[i] += std::fabs(pa[i] - pb[i]);
  }
  const T inv = T(1) / static_cast<T>(c);
  for (std::size_t i = 0; i < hw; ++i) m[i] *= inv;
  return m;
}

template <typename T>
void max_normalize(Tensor<T>& m) {
  T mx = T(0);
  for (std::size_t i = 0; i < m.size(); ++i) mx = std::max(mx, m[i]);
  if (mx > T(0))
    for (std::size_t i = 0; i < m.size(); ++i) m[i] /= mx;
}

}  // namespace detail

/// Mean absolute difference between the two generated images over channels,
/// max-normalized.
template <typename T>
AttributionMapT<T> attribution_from_pair(const Tensor<T>& x_max, const Tensor<T>& x_min) {
  AttributionMapT<T> out;
  out.values = detail::mean_abs_channel_diff(x_max, x_min);
  detail::max_normalize(out.values);
  out.mode = Mode::pair_diff;
  out.source_hash_a = image_hash(x_max);
  out.source_hash_b = image_hash(x_min);
  return out;
}

/// Same construction with the input image against one generated image.
template <typename T>
AttributionMapT<T> attribution_vs_input(const Tensor<T>& x, const Tensor<T>& x_hat) {
  AttributionMapT<T> out;
  out.values = detail::mean_abs_channel_diff(x, x_hat);
  detail::max_normalize(out.values);
  out.mode = Mode::input_diff;
  out.source_hash_a = image_hash(x);
  out.source_hash_b = image_hash(x_hat);
  return out;
}

/// Pixels at or above the given percentile of the map's nonzero values.
/// An identically zero map yields an empty mask (with a warning).
template <typename T>
Tensor<std::uint8_t> threshold_high(const AttributionMapT<T>& map, double percentile = 80.0) {
  if (percentile <= 0.0 || percentile >= 100.0)
    throw std::invalid_argument("threshold_high: percentile must lie in (0, 100)");
  std::vector<T> nonzero;
  nonzero.reserve(map.values.size());
  for (std::size_t i = 0; i < map.values.size(); ++i)
    if (map.values[i] > T(0)) nonzero.push_back(map.values[i]);
  Tensor<std::uint8_t> mask(map.values.shape());
  if (nonzero.empty()) {
    std::fprintf(stderr, "warning: threshold_high on an all-zero attribution map\n");
    return mask;
  }
  std::sort(nonzero.begin(), nonzero.end());
  const auto idx = std::min(nonzero.size() - 1,
                            static_cast<std::size_t>(std::floor(
                                percentile / 100.0 * static_cast<double>(nonzero.size()))));
  const T cut = nonzero[idx];
  for (std::size_t i = 0; i < map.values.size(); ++i)
    mask[i] = map.values[i] >= cut ? std::uint8_t(1) : std::uint8_t(0);
  return mask;
}

// ---------------------------------------------------------------------------
// Rendering (float path)

/// Single-hue ramp from near-black to warm orange.
std::array<float, 3> colormap(float t);

/// (1-alpha) * image + alpha * colormapped(map); output 3 x H x W in [0,1].
Tensor<float> overlay(const Tensor<float>& image, const AttributionMap& map,
                      float alpha = 0.5f);

void save_overlay_png(const std::filesystem::path& path, const Tensor<float>& rgb);

/// Map persisted as a single-band float32 .npy next to a JSON sidecar
/// ("<stem>.json") holding mode, source hashes, method and sample id.
void save_attribution(const std::filesystem::path& npy_path, const AttributionMap& map,
                      const std::string& method, const std::string& sample_id,
                      double percentile);
AttributionMap load_attribution(const std::filesystem::path& npy_path,
                                std::string* method = nullptr,
                                std::string* sample_id = nullptr);

}  // namespace patx::attr
