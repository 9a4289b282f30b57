#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lapseg/dataset/augment.hpp"
#include "lapseg/dataset/image.hpp"
#include "lapseg/dataset/manifest.hpp"

namespace lapseg::dataset {

struct AugmentationStats {
  std::uint64_t augment_calls = 0;
  std::array<std::uint64_t, kAllAugOps.size()> applied{};

  std::uint64_t total_applied() const;
};

struct LoaderOptions {
  Size2 target_size = kDefaultTargetSize;
  // No value means evaluation-style loading: resize only.
  std::optional<AugmentationConfig> augmentation;
  int workers = 1;
  // Keep resized, un-augmented samples in memory after first load.
  bool cache = false;
};

using Sample = std::pair<ImageTensor, MaskTensor>;

/// Loads samples by manifest index. Augmentation randomness comes from
/// (seed, index, epoch), so results do not depend on the worker count.
class SampleLoader {
 public:
  SampleLoader(Manifest manifest, LoaderOptions options);
  ~SampleLoader();

  SampleLoader(const SampleLoader&) = delete;
  SampleLoader& operator=(const SampleLoader&) = delete;

  std::size_t size() const { return manifest_.size(); }
  const Manifest& manifest() const { return manifest_; }
  const LoaderOptions& options() const { return options_; }

  Sample get(std::size_t index, std::uint64_t epoch) const;
  std::vector<Sample> load_batch(std::span<const std::size_t> indices, std::uint64_t epoch) const;

  AugmentationStats stats() const;

 private:
  Sample base_sample(std::size_t index) const;

  Manifest manifest_;
  LoaderOptions options_;
  struct Cache;
  std::unique_ptr<Cache> cache_;
  mutable std::atomic<std::uint64_t> augment_calls_{0};
  mutable std::array<std::atomic<std::uint64_t>, kAllAugOps.size()> applied_{};
};

}  // namespace lapseg::dataset
