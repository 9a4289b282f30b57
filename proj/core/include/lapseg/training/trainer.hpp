#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lapseg/dataset/loader.hpp"
#include "lapseg/metrics/confusion.hpp"
#include "lapseg/model/network.hpp"
#include "lapseg/model/segmenter.hpp"
#include "lapseg/training/config.hpp"

namespace lapseg::training {

struct EpochRecord {
  std::int64_t epoch = 0;
  double train_loss = 0.0;
  double val_dice = 0.0;
  double val_miou = 0.0;
  double learning_rate = 0.0;
  double wall_time_seconds = 0.0;
  std::int64_t steps = 0;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
};

struct CheckpointRecord {
  std::filesystem::path path;
  std::int64_t epoch = 0;
  double val_dice = 0.0;
  std::string model_config_hash;
};

struct TrainResult {
  model::SegmentationNet model{nullptr};
  TrainingLog log;
  std::optional<CheckpointRecord> best;
  dataset::AugmentationStats train_augmentation;
  dataset::AugmentationStats val_augmentation;
  std::optional<metrics::MetricsReport> final_train;
};

struct TrainOptions {
  // Checkpoints, log and resolved config go here; empty means nothing is written.
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> resume_from;
  // Called after each epoch record is appended.
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Seeds the tensor backend's generators. Shuffling and augmentation draw
/// from seeds derived per (seed, epoch, index) and do not need this.
void seed_everything(std::uint64_t seed);

/// Stacks samples into B x 3 x H x W images and B x 1 x H x W {0,1} masks.
std::pair<torch::Tensor, torch::Tensor> to_batch(const std::vector<dataset::Sample>& samples);

/// Image batch -> per-frame metrics, aggregated by aggregate_metrics.
metrics::MetricsReport validate(model::Segmenter& segmenter, const dataset::SampleLoader& loader,
                                int batch_size = 1);
/// Loads `manifest` un-augmented at the segmenter's input size.
metrics::MetricsReport validate(model::Segmenter& segmenter, const dataset::Manifest& manifest,
                                int workers = 1);

/// Mini-batch dice-loss training with validation after every epoch and
/// checkpointing on val dice improvement. `aug` applies to the training set only.
TrainResult train(model::SegmentationNet net, const dataset::Manifest& train_manifest,
                  const dataset::Manifest& val_manifest, const TrainConfig& config,
                  const std::optional<dataset::AugmentationConfig>& aug, const TrainOptions& options = {});

}  // namespace lapseg::training
