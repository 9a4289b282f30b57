#include "lapseg/dataset/loader.hpp"

#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "lapseg/error.hpp"

namespace lapseg::dataset {

std::uint64_t AugmentationStats::total_applied() const {
  return std::accumulate(applied.begin(), applied.end(), std::uint64_t{0});
}

struct SampleLoader::Cache {
  explicit Cache(std::size_t n) : slots(n), once(new std::once_flag[n]) {}
  std::vector<std::optional<Sample>> slots;
  std::unique_ptr<std::once_flag[]> once;
};

SampleLoader::SampleLoader(Manifest manifest, LoaderOptions options)
    : manifest_(std::move(manifest)), options_(std::move(options)) {
  if (options_.workers < 1) throw Error(ErrorCode::invalid_config, "workers must be >= 1");
  if (options_.augmentation) {
    options_.augmentation->target_size = options_.target_size;
    options_.augmentation->validate();
  }
  if (options_.cache) cache_ = std::make_unique<Cache>(manifest_.size());
}

SampleLoader::~SampleLoader() = default;

Sample SampleLoader::base_sample(std::size_t index) const {
  if (index >= manifest_.size()) throw std::out_of_range("sample index out of range");
  if (!cache_) return load_sample(manifest_.records[index], options_.target_size);
  std::call_once(cache_->once[index], [&] {
    cache_->slots[index] = load_sample(manifest_.records[index], options_.target_size);
  });
  return *cache_->slots[index];
}

Sample SampleLoader::get(std::size_t index, std::uint64_t epoch) const {
  Sample base = base_sample(index);
  if (!options_.augmentation) return base;

  const auto& cfg = *options_.augmentation;
  const AugmentationPlan plan = sample_plan(cfg, base.first.height, base.first.width, index, epoch);
  augment_calls_.fetch_add(1, std::memory_order_relaxed);
  for (std::size_t k = 0; k < kAllAugOps.size(); ++k)
    if (plan.applies(kAllAugOps[k])) applied_[k].fetch_add(1, std::memory_order_relaxed);
  return apply_plan(base.first, base.second, plan, cfg.target_size, cfg.image_interpolation);
}

std::vector<Sample> SampleLoader::load_batch(std::span<const std::size_t> indices,
                                             std::uint64_t epoch) const {
  std::vector<Sample> out(indices.size());
  const std::size_t workers = std::min<std::size_t>(std::size_t(options_.workers), indices.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < indices.size(); ++i) out[i] = get(indices[i], epoch);
    return out;
  }

  std::vector<std::exception_ptr> errors(indices.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < indices.size(); i += workers) {
        try {
          out[i] = get(indices[i], epoch);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

AugmentationStats SampleLoader::stats() const {
  AugmentationStats s;
  s.augment_calls = augment_calls_.load();
  for (std::size_t k = 0; k < applied_.size(); ++k) s.applied[k] = applied_[k].load();
  return s;
}

}  // namespace lapseg::dataset
