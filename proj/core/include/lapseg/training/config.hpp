#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "lapseg/metrics/dice_loss.hpp"

namespace lapseg::training {

enum class OptimizerKind { sgd, adam };
enum class LrSchedule { constant, reduce_on_plateau };

std::string_view to_string(OptimizerKind k);
std::string_view to_string(LrSchedule s);
OptimizerKind parse_optimizer(std::string_view text);
LrSchedule parse_lr_schedule(std::string_view text);

struct TrainConfig {
  int batch_size = 12;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int epochs = 100;
  std::uint64_t seed = 0;
  LrSchedule lr_schedule = LrSchedule::constant;
  std::string device = "cpu";

  // Stop after this many optimizer steps even if epochs remain.
  std::optional<std::int64_t> max_steps;
  int workers = 1;
  // Write epoch_<N>.ckpt every this many epochs; the last epoch is always written.
  int checkpoint_every = 1;
  double plateau_factor = 0.1;
  int plateau_patience = 10;
  metrics::DiceLossConfig loss;
  bool cache = true;
  // Evaluate the un-augmented training set once training ends.
  bool final_train_eval = true;

  /// lr may be 0 (a no-op run); everything else must be positive.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace lapseg::training
