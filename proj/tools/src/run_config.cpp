#include "run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "lapseg/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lapseg::cli {

namespace {

const std::set<std::string> kTrainKeys = {
    "batch_size", "optimizer",        "learning_rate",  "momentum",         "weight_decay",
    "epochs",     "seed",             "lr_schedule",    "device",           "max_steps",
    "workers",    "checkpoint_every", "plateau_factor", "plateau_patience", "dice_smooth",
    "dice_aggregation", "cache",      "final_train_eval"};

model::ModelConfig build_model_config(const json& j) {
  if (j.contains("model") && !j["model"].is_null()) return j["model"].get<model::ModelConfig>();
  const Size2 input = parse_size(j.at("input_size").get<std::string>());
  const std::string preset = j.at("model_preset").get<std::string>();
  const json& wm = j.at("width_multiplier");
  model::ModelConfig c;
  if (preset == "tiny") {
    c = model::ModelConfig::tiny(wm.is_null() ? 0.125 : wm.get<double>(), input);
  } else if (preset == "full") {
    c = model::ModelConfig::full_size(j.at("pretrained").get<bool>());
    c.input_size = input;
    if (!wm.is_null()) c.width_multiplier = wm.get<double>();
  } else {
    throw Error(ErrorCode::invalid_config, "model_preset must be 'full' or 'tiny', got '" + preset + "'");
  }
  return c;
}

std::optional<dataset::AugmentationConfig> build_augmentation(const json& j) {
  const json& ops = j.at("augment");
  dataset::AugmentationConfig c;
  if (ops.is_string()) {
    const auto s = ops.get<std::string>();
    if (s == "none") return std::nullopt;
    if (s != "all") throw Error(ErrorCode::invalid_config, "augment must be 'all', 'none' or a list of ops");
    c = dataset::AugmentationConfig::all_ops();
  } else {
    for (const auto& op : ops) c.enabled.insert(dataset::parse_aug_op(op.get<std::string>()));
    if (c.enabled.empty()) return std::nullopt;
  }
  c.default_probability = j.at("aug_probability").get<double>();
  c.crop_fraction_range = j.at("aug_crop_fraction").get<std::pair<double, double>>();
  c.scale_range = j.at("aug_scale_range").get<std::pair<double, double>>();
  c.cutout_size_fraction = j.at("aug_cutout_fraction").get<double>();
  const auto interp = j.at("aug_interpolation").get<std::string>();
  if (interp != "bilinear" && interp != "nearest")
    throw Error(ErrorCode::invalid_config, "aug_interpolation must be 'bilinear' or 'nearest'");
  c.image_interpolation = interp == "nearest" ? dataset::Interpolation::nearest : dataset::Interpolation::bilinear;
  c.validate();
  return c;
}

metrics::BenchProtocol build_bench(const json& j, Size2 input) {
  metrics::BenchProtocol p;
  p.batch_size = j.at("bench_batch_size").get<int>();
  p.warmup_iters = j.at("warmup_iters").get<int>();
  p.timed_iters = j.at("timed_iters").get<int>();
  p.statistic = metrics::parse_bench_statistic(j.at("statistic").get<std::string>());
  p.seed = j.at("bench_seed").get<std::uint64_t>();
  p.input_size = input;
  return p;
}

std::optional<fs::path> optional_path(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return fs::path(j[key].get<std::string>());
}

}  // namespace

json default_config_json() {
  json j = json(training::TrainConfig{});
  if (const char* dev = std::getenv("LAPSEG_DEVICE"); dev && *dev) j["device"] = dev;
  j.update({{"train_manifest", nullptr},
            {"val_manifest", nullptr},
            {"model_preset", "full"},
            {"pretrained", true},
            {"width_multiplier", nullptr},
            {"input_size", to_string(kDefaultTargetSize)},
            {"model", nullptr},
            {"augment", "all"},
            {"aug_probability", 0.5},
            {"aug_crop_fraction", {0.7, 1.0}},
            {"aug_scale_range", {0.75, 1.25}},
            {"aug_cutout_fraction", 0.25},
            {"aug_interpolation", "bilinear"},
            {"bench_batch_size", 1},
            {"warmup_iters", 10},
            {"timed_iters", 100},
            {"statistic", "median"},
            {"bench_seed", 0}});
  return j;
}

json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_config, "cannot read config " + path.string());
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw Error(ErrorCode::invalid_config, path.string() + ": expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::invalid_config, path.string() + ": " + e.what());
  }
}

RunConfig resolve_config(const json& file, const json& overrides) {
  json merged = default_config_json();
  for (const json* layer : {&file, &overrides}) {
    if (layer->is_null()) continue;
    for (const auto& [key, value] : layer->items()) {
      if (!merged.contains(key)) throw Error(ErrorCode::invalid_config, "unknown config key '" + key + "'");
      merged[key] = value;
    }
  }

  RunConfig rc;
  try {
    json train_part = json::object();
    for (const auto& key : kTrainKeys) train_part[key] = merged[key];
    rc.train = train_part.get<training::TrainConfig>();
    rc.train.validate();
    rc.model = build_model_config(merged);
    rc.model.validate();
    rc.augmentation = build_augmentation(merged);
    rc.bench = build_bench(merged, rc.model.input_size);
    rc.train_manifest = optional_path(merged, "train_manifest");
    rc.val_manifest = optional_path(merged, "val_manifest");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_config, std::string("config: ") + e.what());
  }
  merged["model"] = rc.model;
  rc.resolved = std::move(merged);
  return rc;
}

void write_resolved_config(const RunConfig& config, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << config.resolved.dump(2) << '\n';
}

}  // namespace lapseg::cli
