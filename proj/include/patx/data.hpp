#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "patx/tensor.hpp"

namespace patx::data {

/// C x H x W image, values in [0,1].
using Image = Tensor<float>;

enum class Provenance { synthetic, raster };

// Mask class ids shared by synthetic and ingested data.
inline constexpr std::uint8_t kClassBackground = 0;
inline constexpr std::uint8_t kClassWetland = 1;
inline constexpr std::uint8_t kClassBareLand = 2;
inline constexpr std::uint8_t kClassWater = 3;
inline constexpr std::uint8_t kClassAnthropogenic = 4;
inline constexpr int kNumMaskClasses = 5;

/// Immutable after construction; safe to share across threads.
struct SceneSample {
  std::string id;
  Image image;                 // C x H x W
  float label = 0.0f;          // naturalness target in [0,1]
  Tensor<std::uint8_t> mask;   // H x W class ids
  Provenance provenance = Provenance::synthetic;
};

using SamplePtr = std::shared_ptr<const SceneSample>;

struct SynthConfig {
  int size = 64;
  int samples_per_class = 1000;
  // Natural scenes: irregular wetland / bare-land / water blobs.
  int wetland_count_min = 2, wetland_count_max = 3;
  int bare_count_min = 1, bare_count_max = 2;
  int water_count_min = 0, water_count_max = 2;
  double radius_min = 6.0, radius_max = 11.0;
  // Anthropogenic scenes: rectangular fields plus roads.
  int field_count_min = 2, field_count_max = 4;
  int road_count_min = 1, road_count_max = 2;
  // Base colors per class id 0..4 (RGB in [0,1]); per-instance jitter on top.
  std::array<std::array<double, 3>, 5> class_colors = {{
      {0.13, 0.30, 0.12},   // background vegetation
      {0.45, 0.40, 0.18},   // wetland
      {0.52, 0.47, 0.40},   // bare land
      {0.06, 0.12, 0.32},   // water
      {0.60, 0.58, 0.25},   // anthropogenic fields
  }};
  std::array<double, 3> road_color = {0.38, 0.38, 0.36};
  double color_jitter = 0.05;
  double noise_lowfreq = 0.03;  // smooth field, amplitude in value units
  double noise_pixel = 0.006;   // iid per-pixel amplitude
  std::uint64_t seed = 0;

  void validate() const;
};

struct DatasetSplit {
  std::vector<SamplePtr> train, validation, test;
};

// ---------------------------------------------------------------------------

/// raw integer raster / scale, clamped to [0,1]. Rejects negative raw values,
/// naming the offending band.
Image normalize_raw(const Tensor<int>& raw, double scale = 10000.0);

struct Raster {
  Tensor<int> bands;  // 3 x H x W (red, green, blue)
  std::optional<Tensor<std::uint8_t>> mask;
};

/// Reads a multi-band .npy raster (>= 3 bands, first three taken as RGB) plus
/// an optional "<stem>.mask.npy" sidecar of matching spatial shape.
Raster load_raster(const std::filesystem::path& path);

SceneSample generate_synthetic_scene(const SynthConfig& config, int class_label,
                                     std::uint64_t seed);

/// All samples for both classes, ids assigned, seeds derived from config.seed.
std::vector<SamplePtr> generate_synthetic_dataset(const SynthConfig& config);

struct CutBox {
  int y0 = 0, x0 = 0, h = 0, w = 0;
  double area_fraction(int img_h, int img_w) const {
    return static_cast<double>(h) * w / (static_cast<double>(img_h) * img_w);
  }
};

CutBox sample_cutmix_box(int h, int w, std::mt19937_64& rng);

/// Pastes the box region of b into a (image and mask); label becomes the
/// pasted-area-weighted mix of the two labels.
SceneSample cutmix_with_box(const SceneSample& a, const SceneSample& b, const CutBox& box);
SceneSample cutmix(const SceneSample& a, const SceneSample& b, std::mt19937_64& rng);

/// Stratified by pure class label, deterministic given seed. Ratios must be
/// positive and sum to 1 within 1e-9; every split must receive at least one
/// sample of each class.
DatasetSplit split_dataset(const std::vector<SamplePtr>& samples,
                           std::array<double, 3> ratios, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset persistence: one directory per split, one container file per
// sample, manifest.json recording config, seed and per-file hashes.

void save_sample(const std::filesystem::path& file, const SceneSample& s);
SceneSample load_sample(const std::filesystem::path& file);

void save_dataset(const std::filesystem::path& dir, const DatasetSplit& split,
                  const SynthConfig& config);
DatasetSplit load_dataset(const std::filesystem::path& dir);

/// Hash of the dataset manifest file (identity of the exact dataset).
std::uint64_t dataset_manifest_hash(const std::filesystem::path& dir);

}  // namespace patx::data
