#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lapseg/model/network.hpp"
#include "lapseg/model/segmenter.hpp"

namespace lapseg::model {

struct TrainingState {
  std::int64_t epoch = 0;
  double best_val_dice = 0.0;
  // Scheduler bookkeeping needed to resume bit-for-bit.
  double learning_rate = 0.0;
  int plateau_bad_epochs = 0;
  std::int64_t global_step = 0;
};

void to_json(nlohmann::json& j, const TrainingState& s);
void from_json(const nlohmann::json& j, TrainingState& s);

/// Contents of `<checkpoint>.json`.
struct CheckpointSidecar {
  nlohmann::json model_config;
  std::string created_at;
  std::string git_or_version;
  std::int64_t trainable_parameter_count = 0;
  TrainingState training_state;
};

void to_json(nlohmann::json& j, const CheckpointSidecar& s);
void from_json(const nlohmann::json& j, CheckpointSidecar& s);

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);
std::filesystem::path optimizer_path(const std::filesystem::path& checkpoint);

std::string version_string();

/// Writes the torch weight archive, the JSON sidecar and, when `optimizer` is
/// given, `<checkpoint>.optim`.
void save_checkpoint(const std::filesystem::path& checkpoint, SegmentationNet& net,
                     const TrainingState& state, torch::optim::Optimizer* optimizer = nullptr);

void save_color_key_checkpoint(const std::filesystem::path& checkpoint, const ColorKeySegmenter& stub);

CheckpointSidecar read_sidecar(const std::filesystem::path& checkpoint);

struct LoadedCheckpoint {
  std::shared_ptr<Segmenter> segmenter;
  SegmentationNet net{nullptr};  // null for non-network checkpoints
  CheckpointSidecar sidecar;
};

/// Rebuilds the model from the sidecar config (without fetching pretrained
/// backbone weights) and loads the stored parameters and buffers.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& checkpoint);

void load_optimizer_state(const std::filesystem::path& checkpoint, torch::optim::Optimizer& optimizer);

}  // namespace lapseg::model
