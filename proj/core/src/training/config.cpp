#include "lapseg/training/config.hpp"

#include <cmath>
#include <set>

#include <torch/torch.h>

#include "lapseg/error.hpp"

using nlohmann::json;

namespace lapseg::training {

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

std::string_view to_string(LrSchedule s) {
  return s == LrSchedule::reduce_on_plateau ? "reduce_on_plateau" : "constant";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::sgd;
  if (text == "adam") return OptimizerKind::adam;
  throw Error(ErrorCode::invalid_config, "unknown optimizer '" + std::string(text) + "'");
}

LrSchedule parse_lr_schedule(std::string_view text) {
  if (text == "constant") return LrSchedule::constant;
  if (text == "reduce_on_plateau") return LrSchedule::reduce_on_plateau;
  throw Error(ErrorCode::invalid_config, "unknown lr schedule '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_config, msg); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) fail("learning_rate must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (max_steps && *max_steps < 1) fail("max_steps must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
  if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) fail("plateau_factor must be in (0, 1)");
  if (plateau_patience < 0) fail("plateau_patience must be >= 0");
  loss.validate();
  try {
    const torch::Device dev(device);
    if (dev.is_cuda() && !torch::cuda::is_available()) fail("device '" + device + "' is not available");
  } catch (const c10::Error&) {
    fail("unknown device '" + device + "'");
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},
       {"optimizer", to_string(c.optimizer)},
       {"learning_rate", c.learning_rate},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"epochs", c.epochs},
       {"seed", c.seed},
       {"lr_schedule", to_string(c.lr_schedule)},
       {"device", c.device},
       {"max_steps", c.max_steps ? json(*c.max_steps) : json(nullptr)},
       {"workers", c.workers},
       {"checkpoint_every", c.checkpoint_every},
       {"plateau_factor", c.plateau_factor},
       {"plateau_patience", c.plateau_patience},
       {"dice_smooth", c.loss.smooth},
       {"dice_aggregation", metrics::to_string(c.loss.aggregation)},
       {"cache", c.cache},
       {"final_train_eval", c.final_train_eval}};
}

void from_json(const json& j, TrainConfig& c) {
  static const std::set<std::string> known = {
      "batch_size", "optimizer",       "learning_rate",  "momentum",         "weight_decay",
      "epochs",     "seed",            "lr_schedule",    "device",           "max_steps",
      "workers",    "checkpoint_every", "plateau_factor", "plateau_patience", "dice_smooth",
      "dice_aggregation", "cache",     "final_train_eval"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw Error(ErrorCode::invalid_config, "unknown training key '" + key + "'");
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("optimizer")) c.optimizer = parse_optimizer(j["optimizer"].get<std::string>());
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("lr_schedule")) c.lr_schedule = parse_lr_schedule(j["lr_schedule"].get<std::string>());
    c.device = j.value("device", c.device);
    if (j.contains("max_steps"))
      c.max_steps = j["max_steps"].is_null() ? std::nullopt : std::optional(j["max_steps"].get<std::int64_t>());
    c.workers = j.value("workers", c.workers);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.loss.smooth = j.value("dice_smooth", c.loss.smooth);
    if (j.contains("dice_aggregation"))
      c.loss.aggregation = metrics::parse_dice_aggregation(j["dice_aggregation"].get<std::string>());
    c.cache = j.value("cache", c.cache);
    c.final_train_eval = j.value("final_train_eval", c.final_train_eval);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_config, std::string("training config: ") + e.what());
  }
}

}  // namespace lapseg::training
