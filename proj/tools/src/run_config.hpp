#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "lapseg/dataset/augment.hpp"
#include "lapseg/metrics/bench.hpp"
#include "lapseg/model/config.hpp"
#include "lapseg/training/config.hpp"

namespace lapseg::cli {

/// Everything a command can be configured with. The file format is one flat
/// JSON object; see default_config_json() for every key and its default.
struct RunConfig {
  std::optional<std::filesystem::path> train_manifest;
  std::optional<std::filesystem::path> val_manifest;
  model::ModelConfig model;
  training::TrainConfig train;
  std::optional<dataset::AugmentationConfig> augmentation;
  metrics::BenchProtocol bench;

  // The merged flat object plus the fully expanded "model" entry.
  nlohmann::json resolved;
};

/// Defaults; "device" comes from LAPSEG_DEVICE when set.
nlohmann::json default_config_json();

nlohmann::json load_config_file(const std::filesystem::path& path);

/// defaults <- file <- overrides, later layers winning key by key.
RunConfig resolve_config(const nlohmann::json& file, const nlohmann::json& overrides);

void write_resolved_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace lapseg::cli
