#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "patx/tensor.hpp"

namespace patx::io {

// ---------------------------------------------------------------------------
// NumPy .npy containers (version 1.0, little-endian, C order).

struct NpyArray {
  std::vector<int> shape;
  std::string dtype;  // normalized: f4, f8, i1..i8, u1..u8
  std::vector<unsigned char> raw;

  std::size_t element_count() const;
};

NpyArray load_npy(const std::filesystem::path& path);
Tensor<float> npy_as_f32(const NpyArray& a);
Tensor<int> npy_as_i32(const NpyArray& a);
Tensor<std::uint8_t> npy_as_u8(const NpyArray& a);

void save_npy(const std::filesystem::path& path, const Tensor<float>& t);
void save_npy(const std::filesystem::path& path, const Tensor<std::uint8_t>& t);
void save_npy(const std::filesystem::path& path, const Tensor<int>& t);

// ---------------------------------------------------------------------------
// Minimal 8-bit RGB PNG writer (stored-deflate; no external compression lib).

void write_png_rgb8(const std::filesystem::path& path, int height, int width,
                    const std::vector<unsigned char>& rgb);

// ---------------------------------------------------------------------------
// Checkpoints: one binary blob of named float32 tensors with a CRC, plus the
// JSON manifest embedded in the header and mirrored to "<file>.json".

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct Checkpoint {
  nlohmann::json manifest;
  std::vector<NamedTensor> tensors;
};

void save_checkpoint(const std::filesystem::path& file, const nlohmann::json& manifest,
                     const std::vector<NamedTensor>& tensors);
/// Verifies the payload CRC; a mismatch raises an error naming the file.
Checkpoint load_checkpoint(const std::filesystem::path& file);

// ---------------------------------------------------------------------------

std::string hex64(std::uint64_t v);
std::uint64_t file_hash(const std::filesystem::path& path);
std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const void* data, std::size_t n);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace patx::io
