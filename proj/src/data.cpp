#include "patx/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "patx/io.hpp"
#include "patx/rng.hpp"

namespace patx::data {

namespace fs = std::filesystem;
using nlohmann::json;

void SynthConfig::validate() const {
  auto range_ok = [](int lo, int hi) { return lo >= 0 && lo <= hi; };
  if (size < 16 || size % 4 != 0)
    throw std::invalid_argument("SynthConfig: size must be >= 16 and divisible by 4");
  if (samples_per_class < 1)
    throw std::invalid_argument("SynthConfig: samples_per_class must be >= 1");
  if (!range_ok(wetland_count_min, wetland_count_max) || wetland_count_min < 1)
    throw std::invalid_argument("SynthConfig: wetland count range empty (min must be >= 1)");
  if (!range_ok(bare_count_min, bare_count_max) || !range_ok(water_count_min, water_count_max) ||
      !range_ok(field_count_min, field_count_max) || !range_ok(road_count_min, road_count_max))
    throw std::invalid_argument("SynthConfig: empty count range");
  if (radius_min < 1.0 || radius_min > radius_max)
    throw std::invalid_argument("SynthConfig: empty radius range");
  if (color_jitter < 0 || noise_lowfreq < 0 || noise_pixel < 0)
    throw std::invalid_argument("SynthConfig: noise amplitudes must be >= 0");
}

// ---------------------------------------------------------------------------

Image normalize_raw(const Tensor<int>& raw, double scale) {
  if (scale <= 0) throw std::invalid_argument("normalize_raw: scale must be positive");
  if (raw.rank() != 3) throw std::invalid_argument("normalize_raw: expected C x H x W raster");
  const int c = raw.dim(0), h = raw.dim(1), w = raw.dim(2);
  const std::size_t band_size = static_cast<std::size_t>(h) * w;
  for (int b = 0; b < c; ++b) {
    const int* band = raw.data() + static_cast<std::size_t>(b) * band_size;
    for (std::size_t i = 0; i < band_size; ++i)
      if (band[i] < 0)
        throw std::invalid_argument("normalize_raw: negative value in band " +
                                    std::to_string(b));
  }
  Image out(raw.shape());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = raw[i] / scale;
    out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

Raster load_raster(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("raster not found: " + path.string());
  const io::NpyArray arr = io::load_npy(path);
  if (arr.shape.size() != 3)
    throw std::runtime_error("raster must be band x H x W, got rank " +
                             std::to_string(arr.shape.size()) + ": " + path.string());
  if (arr.shape[0] < 3)
    throw std::runtime_error("raster has " + std::to_string(arr.shape[0]) +
                             " bands, need at least 3 (red, green, blue): " + path.string());
  Tensor<int> all = io::npy_as_i32(arr);
  const int h = arr.shape[1], w = arr.shape[2];
  Raster r;
  r.bands = Tensor<int>({3, h, w});
  std::memcpy(r.bands.data(), all.data(), static_cast<std::size_t>(3) * h * w * sizeof(int));

  fs::path mask_path = path;
  mask_path.replace_extension();
  mask_path += ".mask.npy";
  if (fs::exists(mask_path)) {
    const io::NpyArray m = io::load_npy(mask_path);
    if (m.shape.size() != 2 || m.shape[0] != h || m.shape[1] != w)
      throw std::runtime_error("sidecar mask shape does not match raster: " +
                               mask_path.string());
    r.mask = io::npy_as_u8(m);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

struct Rgb {
  float r, g, b;
};

Rgb jitter_color(const std::array<double, 3>& base, double jitter, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-jitter, jitter);
  auto clamp01 = [](double v) { return std::clamp(v, 0.02, 0.98); };
  return {static_cast<float>(clamp01(base[0] + d(rng))),
          static_cast<float>(clamp01(base[1] + d(rng))),
          static_cast<float>(clamp01(base[2] + d(rng)))};
}

void put(Image& img, Tensor<std::uint8_t>& mask, int s, int y, int x, const Rgb& c,
         std::uint8_t cls) {
  const std::size_t hw = static_cast<std::size_t>(s) * s;
  const std::size_t p = static_cast<std::size_t>(y) * s + x;
  img[p] = c.r;
  img[hw + p] = c.g;
  img[2 * hw + p] = c.b;
  mask[p] = cls;
}

// Irregular blob: disc whose radius is modulated by a few angular harmonics.
void paint_blob(Image& img, Tensor<std::uint8_t>& mask, int s, double cx, double cy, double r0,
                const Rgb& color, std::uint8_t cls, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ph(0.0, 2.0 * M_PI);
  const double p1 = ph(rng), p2 = ph(rng), p3 = ph(rng);
  const double rmax = r0 * 1.5;
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - rmax)));
  const int y1 = std::min(s - 1, static_cast<int>(std::ceil(cy + rmax)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - rmax)));
  const int x1 = std::min(s - 1, static_cast<int>(std::ceil(cx + rmax)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dy = y - cy, dx = x - cx;
      const double dist = std::sqrt(dx * dx + dy * dy);
      const double theta = std::atan2(dy, dx);
      const double r = r0 * (1.0 + 0.18 * std::sin(2.0 * theta + p1) +
                             0.10 * std::sin(3.0 * theta + p2) +
                             0.05 * std::sin(5.0 * theta + p3));
      if (dist <= r) put(img, mask, s, y, x, color, cls);
    }
  }
}

void paint_rect(Image& img, Tensor<std::uint8_t>& mask, int s, double cx, double cy, double hw,
                double hh, double angle, const Rgb& color, std::uint8_t cls) {
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double reach = std::hypot(hw, hh);
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
  const int y1 = std::min(s - 1, static_cast<int>(std::ceil(cy + reach)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
  const int x1 = std::min(s - 1, static_cast<int>(std::ceil(cx + reach)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = ca * dx + sa * dy;
      const double v = -sa * dx + ca * dy;
      if (std::fabs(u) <= hw && std::fabs(v) <= hh) put(img, mask, s, y, x, color, cls);
    }
  }
}

void paint_road(Image& img, Tensor<std::uint8_t>& mask, int s, const Rgb& color,
                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  // endpoints on opposite borders
  double ax, ay, bx, by;
  if (u01(rng) < 0.5) {
    ax = u01(rng) * s;
    ay = 0;
    bx = u01(rng) * s;
    by = s - 1;
  } else {
    ax = 0;
    ay = u01(rng) * s;
    bx = s - 1;
    by = u01(rng) * s;
  }
  const double half_w = 0.8 + 1.0 * u01(rng);
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double t = std::clamp(((x - ax) * vx + (y - ay) * vy) / len2, 0.0, 1.0);
      const double dx = x - (ax + t * vx), dy = y - (ay + t * vy);
      if (dx * dx + dy * dy <= half_w * half_w)
        put(img, mask, s, y, x, color, kClassAnthropogenic);
    }
  }
}

// Smooth field in [-1,1]: bilinear interpolation of a coarse random grid.
void add_lowfreq_noise(Image& img, int s, double amplitude, std::mt19937_64& rng) {
  if (amplitude <= 0) return;
  const int cell = 8;
  const int g = s / cell + 2;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> grid(static_cast<std::size_t>(g) * g);
    for (auto& v : grid) v = u(rng);
    float* ch = img.data() + static_cast<std::size_t>(c) * s * s;
    for (int y = 0; y < s; ++y) {
      const double gy = static_cast<double>(y) / cell;
      const int iy = static_cast<int>(gy);
      const double fy = gy - iy;
      for (int x = 0; x < s; ++x) {
        const double gx = static_cast<double>(x) / cell;
        const int ix = static_cast<int>(gx);
        const double fx = gx - ix;
        const double v00 = grid[static_cast<std::size_t>(iy) * g + ix];
        const double v01 = grid[static_cast<std::size_t>(iy) * g + ix + 1];
        const double v10 = grid[static_cast<std::size_t>(iy + 1) * g + ix];
        const double v11 = grid[static_cast<std::size_t>(iy + 1) * g + ix + 1];
        const double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                         fy * ((1 - fx) * v10 + fx * v11);
        ch[static_cast<std::size_t>(y) * s + x] += static_cast<float>(amplitude * v);
      }
    }
  }
}

}  // namespace

SceneSample generate_synthetic_scene(const SynthConfig& config, int class_label,
                                     std::uint64_t seed) {
  config.validate();
  if (class_label != 0 && class_label != 1)
    throw std::invalid_argument("generate_synthetic_scene: class_label must be 0 or 1");
  const int s = config.size;
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform_int = [&](int lo, int hi) {
    return lo + static_cast<int>(u01(rng) * (hi - lo + 1)) % (hi - lo + 1);
  };
  auto uniform_radius = [&] {
    return config.radius_min + u01(rng) * (config.radius_max - config.radius_min);
  };

  SceneSample out;
  out.label = static_cast<float>(class_label);
  out.provenance = Provenance::synthetic;
  out.image = Image({3, s, s});
  out.mask = Tensor<std::uint8_t>({s, s});

  const Rgb bg = jitter_color(config.class_colors[0], config.color_jitter, rng);
  const std::size_t hw = static_cast<std::size_t>(s) * s;
  for (std::size_t i = 0; i < hw; ++i) {
    out.image[i] = bg.r;
    out.image[hw + i] = bg.g;
    out.image[2 * hw + i] = bg.b;
  }

  // Water appears with the same statistics in both classes so it carries no
  // label information.
  const int n_water = uniform_int(config.water_count_min, config.water_count_max);
  for (int i = 0; i < n_water; ++i) {
    const Rgb c = jitter_color(config.class_colors[kClassWater], config.color_jitter, rng);
    paint_blob(out.image, out.mask, s, u01(rng) * s, u01(rng) * s, uniform_radius(), c,
               kClassWater, rng);
  }

  if (class_label == 1) {
    const int n_wet = uniform_int(config.wetland_count_min, config.wetland_count_max);
    for (int i = 0; i < n_wet; ++i) {
      const Rgb c = jitter_color(config.class_colors[kClassWetland], config.color_jitter, rng);
      double r = uniform_radius();
      double cx, cy;
      if (i == 0) {
        // first blob kept fully interior so class-1 coverage is guaranteed
        r = std::max(r, 0.5 * (config.radius_min + config.radius_max));
        const double margin = 1.6 * r;
        cx = margin + u01(rng) * (s - 2 * margin);
        cy = margin + u01(rng) * (s - 2 * margin);
      } else {
        cx = u01(rng) * s;
        cy = u01(rng) * s;
      }
      paint_blob(out.image, out.mask, s, cx, cy, r, c, kClassWetland, rng);
    }
    const int n_bare = uniform_int(config.bare_count_min, config.bare_count_max);
    for (int i = 0; i < n_bare; ++i) {
      const Rgb c = jitter_color(config.class_colors[kClassBareLand], config.color_jitter, rng);
      paint_blob(out.image, out.mask, s, u01(rng) * s, u01(rng) * s, uniform_radius(), c,
                 kClassBareLand, rng);
    }
  } else {
    const int n_field = uniform_int(config.field_count_min, config.field_count_max);
    for (int i = 0; i < n_field; ++i) {
      const Rgb c =
          jitter_color(config.class_colors[kClassAnthropogenic], config.color_jitter, rng);
      const double hw_half = 6.0 + u01(rng) * 8.0;
      const double hh_half = 4.0 + u01(rng) * 6.0;
      const double angle = (u01(rng) - 0.5) * 0.6;
      paint_rect(out.image, out.mask, s, u01(rng) * s, u01(rng) * s, hw_half, hh_half, angle,
                 c, kClassAnthropogenic);
    }
    const int n_road = uniform_int(config.road_count_min, config.road_count_max);
    for (int i = 0; i < n_road; ++i) {
      const Rgb c = jitter_color({config.road_color[0], config.road_color[1],
                                  config.road_color[2]},
                                 config.color_jitter * 0.5, rng);
      paint_road(out.image, out.mask, s, c, rng);
    }
  }

  add_lowfreq_noise(out.image, s, config.noise_lowfreq, rng);
  if (config.noise_pixel > 0) {
    std::uniform_real_distribution<double> pn(-config.noise_pixel, config.noise_pixel);
    for (std::size_t i = 0; i < out.image.size(); ++i)
      out.image[i] += static_cast<float>(pn(rng));
  }
  for (std::size_t i = 0; i < out.image.size(); ++i)
    out.image[i] = std::clamp(out.image[i], 0.0f, 1.0f);
  return out;
}

std::vector<SamplePtr> generate_synthetic_dataset(const SynthConfig& config) {
  config.validate();
  std::vector<SamplePtr> out;
  out.reserve(static_cast<std::size_t>(2) * config.samples_per_class);
  char idbuf[32];
  for (int label = 1; label >= 0; --label) {
    const char* tag = label == 1 ? "synth-natural" : "synth-anthro";
    for (int i = 0; i < config.samples_per_class; ++i) {
      const std::uint64_t seed = derive_seed(config.seed, tag, static_cast<std::uint64_t>(i));
      auto s = std::make_shared<SceneSample>(generate_synthetic_scene(config, label, seed));
      std::snprintf(idbuf, sizeof(idbuf), "%s%05d", label == 1 ? "nat" : "ant", i);
      const_cast<SceneSample&>(*s).id = idbuf;
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CutMix

CutBox sample_cutmix_box(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> frac(0.1, 0.5);
  std::uniform_real_distribution<double> logaspect(-0.26, 0.26);  // ~[1/1.3, 1.3]
  const double rho = frac(rng);
  const double aspect = std::exp(logaspect(rng));
  CutBox box;
  box.h = std::clamp(static_cast<int>(std::lround(h * std::sqrt(rho / aspect))), 1, h);
  box.w = std::clamp(static_cast<int>(std::lround(w * std::sqrt(rho * aspect))), 1, w);
  std::uniform_int_distribution<int> oy(0, h - box.h), ox(0, w - box.w);
  box.y0 = oy(rng);
  box.x0 = ox(rng);
  return box;
}

SceneSample cutmix_with_box(const SceneSample& a, const SceneSample& b, const CutBox& box) {
  if (!a.image.same_shape(b.image) || !a.mask.same_shape(b.mask))
    throw std::invalid_argument("cutmix: samples must have identical shapes");
  const int c = a.image.dim(0), h = a.image.dim(1), w = a.image.dim(2);
  SceneSample out = a;
  out.id = a.id + "+" + b.id;
  if (box.h <= 0 || box.w <= 0) return out;
  if (box.y0 < 0 || box.x0 < 0 || box.y0 + box.h > h || box.x0 + box.w > w)
    throw std::invalid_argument("cutmix: box out of bounds");
  for (int ch = 0; ch < c; ++ch) {
    for (int y = box.y0; y < box.y0 + box.h; ++y) {
      const std::size_t off = (static_cast<std::size_t>(ch) * h + y) * w;
      for (int x = box.x0; x < box.x0 + box.w; ++x) out.image[off + x] = b.image[off + x];
    }
  }
  for (int y = box.y0; y < box.y0 + box.h; ++y) {
    const std::size_t off = static_cast<std::size_t>(y) * w;
    for (int x = box.x0; x < box.x0 + box.w; ++x) out.mask[off + x] = b.mask[off + x];
  }
  const double rho = box.area_fraction(h, w);
  out.label = static_cast<float>((1.0 - rho) * a.label + rho * b.label);
  return out;
}

SceneSample cutmix(const SceneSample& a, const SceneSample& b, std::mt19937_64& rng) {
  if (!a.image.same_shape(b.image))
    throw std::invalid_argument("cutmix: samples must have identical shapes");
  return cutmix_with_box(a, b, sample_cutmix_box(a.image.dim(1), a.image.dim(2), rng));
}

// ---------------------------------------------------------------------------
// Split

DatasetSplit split_dataset(const std::vector<SamplePtr>& samples, std::array<double, 3> ratios,
                           std::uint64_t seed) {
  for (double r : ratios)
    if (r <= 0) throw std::invalid_argument("split_dataset: ratios must be positive");
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: ratios must sum to 1");

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const float l = samples[i]->label;
    if (l != 0.0f && l != 1.0f)
      throw std::invalid_argument("split_dataset: sample " + samples[i]->id +
                                  " has fractional label; stratification needs pure labels");
    by_class[l == 1.0f ? 1 : 0].push_back(i);
  }

  DatasetSplit out;
  auto rng = make_rng(seed);
  // carry-based rounding keeps global split sizes at the exact ratio totals
  double carry_train = 0.0, carry_val = 0.0;
  for (auto& idx : by_class) {
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<double>(idx.size());
    const double want_train = n * ratios[0] + carry_train;
    const auto n_train = static_cast<std::size_t>(std::floor(want_train + 1e-12));
    carry_train = want_train - static_cast<double>(n_train);
    const double want_val = n * ratios[1] + carry_val;
    const auto n_val = static_cast<std::size_t>(std::floor(want_val + 1e-12));
    carry_val = want_val - static_cast<double>(n_val);
    if (n_train + n_val > idx.size())
      throw std::invalid_argument("split_dataset: too few samples for the requested ratios");
    const std::size_t n_test = idx.size() - n_train - n_val;
    if (n_train == 0 || n_val == 0 || n_test == 0)
      throw std::invalid_argument(
          "split_dataset: too few samples to populate every split for a class");
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto& dst = i < n_train ? out.train
                              : (i < n_train + n_val ? out.validation : out.test);
      dst.push_back(samples[idx[i]]);
    }
  }
  // deterministic order within each split, independent of class interleaving
  auto by_id = [](const SamplePtr& a, const SamplePtr& b) { return a->id < b->id; };
  std::sort(out.train.begin(), out.train.end(), by_id);
  std::sort(out.validation.begin(), out.validation.end(), by_id);
  std::sort(out.test.begin(), out.test.end(), by_id);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {
constexpr char kSampleMagic[8] = {'P', 'X', 'S', 'A', 'M', 'P', '0', '1'};
}

void save_sample(const fs::path& file, const SceneSample& s) {
  json header;
  header["id"] = s.id;
  header["label"] = s.label;
  header["provenance"] = s.provenance == Provenance::synthetic ? "synthetic" : "raster";
  header["image_shape"] = s.image.shape();
  header["mask_shape"] = s.mask.shape();
  const std::string h = header.dump();

  std::vector<unsigned char> out(kSampleMagic, kSampleMagic + 8);
  const auto hlen = static_cast<std::uint32_t>(h.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(hlen >> (8 * i)));
  out.insert(out.end(), h.begin(), h.end());
  const auto* img = reinterpret_cast<const unsigned char*>(s.image.data());
  out.insert(out.end(), img, img + s.image.size() * sizeof(float));
  out.insert(out.end(), s.mask.data(), s.mask.data() + s.mask.size());
  io::write_file(file, out.data(), out.size());
}

SceneSample load_sample(const fs::path& file) {
  auto buf = io::read_file(file);
  if (buf.size() < 12 || std::memcmp(buf.data(), kSampleMagic, 8) != 0)
    throw std::runtime_error("not a sample file: " + file.string());
  std::uint32_t hlen = 0;
  for (int i = 0; i < 4; ++i) hlen |= static_cast<std::uint32_t>(buf[8 + i]) << (8 * i);
  const json header = json::parse(std::string(buf.begin() + 12, buf.begin() + 12 + hlen));

  SceneSample s;
  s.id = header.at("id").get<std::string>();
  s.label = header.at("label").get<float>();
  s.provenance = header.at("provenance").get<std::string>() == "raster" ? Provenance::raster
                                                                        : Provenance::synthetic;
  s.image = Image(header.at("image_shape").get<std::vector<int>>());
  s.mask = Tensor<std::uint8_t>(header.at("mask_shape").get<std::vector<int>>());
  const std::size_t need = 12 + hlen + s.image.size() * sizeof(float) + s.mask.size();
  if (buf.size() < need) throw std::runtime_error("truncated sample file: " + file.string());
  std::memcpy(s.image.data(), buf.data() + 12 + hlen, s.image.size() * sizeof(float));
  std::memcpy(s.mask.data(), buf.data() + 12 + hlen + s.image.size() * sizeof(float),
              s.mask.size());
  return s;
}

void save_dataset(const fs::path& dir, const DatasetSplit& split, const SynthConfig& config) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "patx-dataset-v1";
  json cfg;
  cfg["size"] = config.size;
  cfg["samples_per_class"] = config.samples_per_class;
  cfg["seed"] = config.seed;
  manifest["config"] = cfg;

  const std::pair<const char*, const std::vector<SamplePtr>*> parts[] = {
      {"train", &split.train}, {"val", &split.validation}, {"test", &split.test}};
  for (const auto& [name, list] : parts) {
    fs::create_directories(dir / name);
    json files = json::array();
    for (const auto& s : *list) {
      const fs::path file = dir / name / (s->id + ".pxs");
      save_sample(file, *s);
      json e;
      e["file"] = std::string(name) + "/" + s->id + ".pxs";
      e["id"] = s->id;
      e["label"] = s->label;
      e["hash"] = io::hex64(io::file_hash(file));
      files.push_back(e);
    }
    manifest["splits"][name] = files;
  }
  io::write_json(dir / "manifest.json", manifest);
}

DatasetSplit load_dataset(const fs::path& dir) {
  const json manifest = io::read_json(dir / "manifest.json");
  DatasetSplit out;
  const std::pair<const char*, std::vector<SamplePtr>*> parts[] = {
      {"train", &out.train}, {"val", &out.validation}, {"test", &out.test}};
  for (const auto& [name, list] : parts) {
    for (const auto& e : manifest.at("splits").at(name)) {
      const fs::path file = dir / e.at("file").get<std::string>();
      list->push_back(std::make_shared<SceneSample>(load_sample(file)));
    }
  }
  return out;
}

std::uint64_t dataset_manifest_hash(const fs::path& dir) {
  return io::file_hash(dir / "manifest.json");
}

}  // namespace patx::data
