#include "patx/attribution.hpp"

#include <stdexcept>

#include <json.hpp>

#include "patx/io.hpp"

namespace patx::attr {

namespace fs = std::filesystem;
using nlohmann::json;

Mode mode_from_name(const std::string& name) {
  if (name == "pair-diff") return Mode::pair_diff;
  if (name == "input-diff") return Mode::input_diff;
  throw std::invalid_argument("unknown attribution mode: " + name +
                              " (expected pair-diff or input-diff)");
}

std::array<float, 3> colormap(float t) {
  t = std::clamp(t, 0.0f, 1.0f);
  const std::array<float, 3> lo = {0.05f, 0.03f, 0.00f};
  const std::array<float, 3> hi = {1.00f, 0.62f, 0.10f};
  return {lo[0] + t * (hi[0] - lo[0]), lo[1] + t * (hi[1] - lo[1]),
          lo[2] + t * (hi[2] - lo[2])};
}

Tensor<float> overlay(const Tensor<float>& image, const AttributionMap& map, float alpha) {
  if (alpha < 0.0f || alpha > 1.0f)
    throw std::invalid_argument("overlay: alpha must lie in [0,1]");
  if (image.rank() != 3) throw std::invalid_argument("overlay: expected C x H x W image");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (map.values.dim(0) != h || map.values.dim(1) != w)
    throw std::invalid_argument("overlay: map and image spatial shapes differ");
  Tensor<float> out({3, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < hw; ++i) {
    std::array<float, 3> base{};
    if (c >= 3) {
      base = {image[i], image[hw + i], image[2 * hw + i]};
    } else {
      base = {image[i], image[i], image[i]};  // grayscale replicated
    }
    const auto heat = colormap(map.values[i]);
    for (int ch = 0; ch < 3; ++ch) {
      const float v = (1.0f - alpha) * base[static_cast<std::size_t>(ch)] +
                      alpha * heat[static_cast<std::size_t>(ch)];
      out[static_cast<std::size_t>(ch) * hw + i] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return out;
}

void save_overlay_png(const fs::path& path, const Tensor<float>& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3)
    throw std::invalid_argument("save_overlay_png: expected 3 x H x W image");
  const int h = rgb.dim(1), w = rgb.dim(2);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<unsigned char> bytes(hw * 3);
  for (std::size_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c)
      bytes[i * 3 + static_cast<std::size_t>(c)] = static_cast<unsigned char>(
          std::lround(std::clamp(rgb[static_cast<std::size_t>(c) * hw + i], 0.0f, 1.0f) *
                      255.0f));
  io::write_png_rgb8(path, h, w, bytes);
}

void save_attribution(const fs::path& npy_path, const AttributionMap& map,
                      const std::string& method, const std::string& sample_id,
                      double percentile) {
  io::save_npy(npy_path, map.values);
  json side;
  side["mode"] = mode_name(map.mode);
  side["method"] = method;
  side["sample_id"] = sample_id;
  side["percentile"] = percentile;
  side["source_hash_a"] = map.source_hash_a;
  side["source_hash_b"] = map.source_hash_b;
  fs::path sidecar = npy_path;
  sidecar.replace_extension(".json");
  io::write_json(sidecar, side);
}

AttributionMap load_attribution(const fs::path& npy_path, std::string* method,
                                std::string* sample_id) {
  AttributionMap map;
  map.values = io::npy_as_f32(io::load_npy(npy_path));
  if (map.values.rank() != 2)
    throw std::runtime_error("attribution map must be H x W: " + npy_path.string());
  fs::path sidecar = npy_path;
  sidecar.replace_extension(".json");
  const json side = io::read_json(sidecar);
  map.mode = mode_from_name(side.at("mode").get<std::string>());
  map.source_hash_a = side.at("source_hash_a").get<std::string>();
  map.source_hash_b = side.at("source_hash_b").get<std::string>();
  if (method) *method = side.at("method").get<std::string>();
  if (sample_id) *sample_id = side.at("sample_id").get<std::string>();
  return map;
}

}  // namespace patx::attr
