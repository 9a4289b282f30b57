#include "synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unistd.h>

#include "lapseg/dataset/image.hpp"
#include "lapseg/random.hpp"

namespace fs = std::filesystem;

namespace lapseg::testing {

std::array<float, 3> instrument_rgb() {
  return {kInstrumentRgb8[0] / 255.0f, kInstrumentRgb8[1] / 255.0f, kInstrumentRgb8[2] / 255.0f};
}

namespace {

struct Bar {
  double x0, y0, x1, y1, half_width;
};

double segment_distance(const Bar& b, double x, double y) {
  const double dx = b.x1 - b.x0, dy = b.y1 - b.y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((x - b.x0) * dx + (y - b.y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(x - (b.x0 + t * dx), y - (b.y0 + t * dy));
}

}  // namespace

dataset::Manifest write_synthetic_dataset(const fs::path& root, const SyntheticOptions& options) {
  const int h = options.size.height, w = options.size.width;
  for (int i = 0; i < options.count; ++i) {
    Rng rng(derive_seed({options.seed, std::uint64_t(i)}));
    const std::string proc = "proc" + std::to_string(i % std::max(1, options.procedures));
    char frame[32];
    std::snprintf(frame, sizeof frame, "frame_%04d", i);

    // Instruments enter from the left or bottom edge and end inside the frame.
    std::vector<Bar> bars;
    if (!options.empty_masks) {
      const int n_bars = 1 + int(rng.below(2));
      for (int k = 0; k < n_bars; ++k) {
        Bar b{};
        if (rng.bernoulli(0.5)) {
          b.x0 = -2;
          b.y0 = rng.uniform(0.1, 0.9) * h;
        } else {
          b.x0 = rng.uniform(0.1, 0.9) * w;
          b.y0 = h + 2;
        }
        b.x1 = rng.uniform(0.35, 0.85) * w;
        b.y1 = rng.uniform(0.15, 0.65) * h;
        b.half_width = rng.uniform(0.05, 0.1) * std::min(h, w);
        bars.push_back(b);
      }
    }

    dataset::ImageTensor image(h, w);
    dataset::MaskTensor mask(h, w);
    dataset::RawMask labels{h, w, std::vector<std::int32_t>(std::size_t(h) * w, 0)};
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int label = 0;
        for (std::size_t k = 0; k < bars.size(); ++k)
          if (segment_distance(bars[k], x + 0.5, y + 0.5) <= bars[k].half_width) label = int(k) + 1;
        if (label) {
          for (int c = 0; c < 3; ++c) image.at(y, x, c) = kInstrumentRgb8[c] / 255.0f;
        } else {
          const double shade = 0.15 * std::sin(0.1 * x + 0.07 * y);
          image.at(y, x, 0) = float(std::round((180 + 40 * shade + rng.uniform(-20, 20))) / 255.0);
          image.at(y, x, 1) = float(std::round((55 + 30 * shade + rng.uniform(-15, 15))) / 255.0);
          image.at(y, x, 2) = float(std::round((60 + 30 * shade + rng.uniform(-15, 15))) / 255.0);
        }
        labels.data[std::size_t(y) * w + x] = label;
      }
    }

    const fs::path img_path = root / "images" / proc / (std::string(frame) + ".png");
    const fs::path mask_path = root / "masks" / proc / (std::string(frame) + ".png");
    fs::create_directories(img_path.parent_path());
    fs::create_directories(mask_path.parent_path());
    dataset::write_image_png(image, img_path);
    if (options.instance_labels) {
      // Labels go out as raw 8-bit values through a mask-as-image detour.
      dataset::ImageTensor raw(h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int c = 0; c < 3; ++c) raw.at(y, x, c) = labels.data[std::size_t(y) * w + x] / 255.0f;
      dataset::write_image_png(raw, mask_path);
    } else {
      dataset::write_mask_png(dataset::binarize_mask(labels), mask_path);
    }
  }
  return dataset::scan_dataset(root, dataset::Layout::paired_dirs);
}

model::ColorKeySegmenter oracle_segmenter(Size2 input_size) {
  return model::ColorKeySegmenter(instrument_rgb(), 1e-3f, input_size);
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("lapseg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace lapseg::testing
