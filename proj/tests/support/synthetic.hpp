#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "lapseg/dataset/manifest.hpp"
#include "lapseg/model/segmenter.hpp"
#include "lapseg/types.hpp"

namespace lapseg::testing {

// Instruments are painted in this exact 8-bit grey; the background is reddish
// and never comes within 30/255 of it.
inline constexpr std::array<std::uint8_t, 3> kInstrumentRgb8{128, 128, 128};

std::array<float, 3> instrument_rgb();

struct SyntheticOptions {
  int count = 8;
  Size2 size{64, 64};
  std::uint64_t seed = 1;
  int procedures = 2;
  // Masks hold instance labels 1, 2, ... instead of 255.
  bool instance_labels = false;
  bool empty_masks = false;
};

/// Writes images/<proc>/<frame>.png and masks/<proc>/<frame>.png under `root`
/// and returns the scanned manifest.
dataset::Manifest write_synthetic_dataset(const std::filesystem::path& root, const SyntheticOptions& options);

/// Scripted segmenter that reproduces synthetic ground truth exactly.
model::ColorKeySegmenter oracle_segmenter(Size2 input_size);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace lapseg::testing
