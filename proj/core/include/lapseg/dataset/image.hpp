#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "lapseg/dataset/manifest.hpp"
#include "lapseg/types.hpp"

namespace lapseg::dataset {

using lapseg::Size2;
using lapseg::kDefaultTargetSize;

/// Interleaved RGB, row-major, values in [0, 1].
struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  ImageTensor() = default;
  ImageTensor(int h, int w) : height(h), width(w), data(std::size_t(h) * w * 3, 0.0f) {}

  float& at(int y, int x, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }

  bool operator==(const ImageTensor&) const = default;
};

/// Values in {0, 1}.
struct MaskTensor {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  MaskTensor() = default;
  MaskTensor(int h, int w) : height(h), width(w), data(std::size_t(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return data[std::size_t(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[std::size_t(y) * width + x]; }

  bool operator==(const MaskTensor&) const = default;
};

/// Instance-labelled mask straight from disk: 0 background, >0 instrument.
struct RawMask {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> data;
};

MaskTensor binarize_mask(const RawMask& raw);

ImageTensor read_image(const std::filesystem::path& path);
RawMask read_raw_mask(const std::filesystem::path& path);

void write_image_png(const ImageTensor& image, const std::filesystem::path& path);
/// Writes {0,1} as {0,255}.
void write_mask_png(const MaskTensor& mask, const std::filesystem::path& path);

enum class Interpolation { nearest, bilinear };

ImageTensor resize(const ImageTensor& image, Size2 size,
                   Interpolation interp = Interpolation::bilinear);
MaskTensor resize(const MaskTensor& mask, Size2 size);

ImageTensor mask_as_image(const MaskTensor& mask);

/// Bilinear image resize and nearest-neighbour mask resize to `target`.
std::pair<ImageTensor, MaskTensor> load_sample(const SampleRecord& record, Size2 target);

}  // namespace lapseg::dataset
