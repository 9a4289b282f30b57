#include "lapseg/model/checkpoint.hpp"

#include <ctime>
#include <fstream>

#include "lapseg/error.hpp"

#ifndef LAPSEG_VERSION
#define LAPSEG_VERSION "unknown"
#endif
#ifndef LAPSEG_GIT_REV
#define LAPSEG_GIT_REV ""
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace lapseg::model {

namespace {

constexpr std::string_view kColorKeyArchitecture = "color_key";

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path with_suffix(const fs::path& p, const char* suffix) {
  fs::path out = p;
  out += suffix;
  return out;
}

void write_json(const fs::path& path, const json& j) {
  const fs::path tmp = with_suffix(path, ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

void prepare_dir(const fs::path& checkpoint) {
  if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());
}

}  // namespace

void to_json(json& j, const TrainingState& s) {
  j = {{"epoch", s.epoch},
       {"best_val_dice", s.best_val_dice},
       {"learning_rate", s.learning_rate},
       {"plateau_bad_epochs", s.plateau_bad_epochs},
       {"global_step", s.global_step}};
}

void from_json(const json& j, TrainingState& s) {
  s.epoch = j.at("epoch").get<std::int64_t>();
  s.best_val_dice = j.at("best_val_dice").get<double>();
  s.learning_rate = j.value("learning_rate", 0.0);
  s.plateau_bad_epochs = j.value("plateau_bad_epochs", 0);
  s.global_step = j.value("global_step", std::int64_t{0});
}

void to_json(json& j, const CheckpointSidecar& s) {
  j = {{"model_config", s.model_config},
       {"created_at", s.created_at},
       {"git_or_version", s.git_or_version},
       {"trainable_parameter_count", s.trainable_parameter_count},
       {"training_state", s.training_state}};
}

void from_json(const json& j, CheckpointSidecar& s) {
  s.model_config = j.at("model_config");
  s.created_at = j.at("created_at").get<std::string>();
  s.git_or_version = j.at("git_or_version").get<std::string>();
  s.trainable_parameter_count = j.at("trainable_parameter_count").get<std::int64_t>();
  s.training_state = j.at("training_state").get<TrainingState>();
}

fs::path sidecar_path(const fs::path& checkpoint) { return with_suffix(checkpoint, ".json"); }
fs::path optimizer_path(const fs::path& checkpoint) { return with_suffix(checkpoint, ".optim"); }

std::string version_string() {
  std::string v = LAPSEG_VERSION;
  const std::string rev = LAPSEG_GIT_REV;
  return rev.empty() ? v : v + "+" + rev;
}

void save_checkpoint(const fs::path& checkpoint, SegmentationNet& net, const TrainingState& state,
                     torch::optim::Optimizer* optimizer) {
  prepare_dir(checkpoint);
  const fs::path tmp = with_suffix(checkpoint, ".tmp");
  torch::save(net, tmp.string());
  fs::rename(tmp, checkpoint);
  if (optimizer) {
    const fs::path opt_tmp = with_suffix(optimizer_path(checkpoint), ".tmp");
    torch::save(*optimizer, opt_tmp.string());
    fs::rename(opt_tmp, optimizer_path(checkpoint));
  }
  CheckpointSidecar sidecar;
  sidecar.model_config = net->config();
  sidecar.created_at = utc_now();
  sidecar.git_or_version = version_string();
  sidecar.trainable_parameter_count = net->trainable_parameter_count();
  sidecar.training_state = state;
  write_json(sidecar_path(checkpoint), sidecar);
}

void save_color_key_checkpoint(const fs::path& checkpoint, const ColorKeySegmenter& stub) {
  prepare_dir(checkpoint);
  const auto& k = stub.key();
  torch::save(torch::tensor({k[0], k[1], k[2], stub.tolerance()}), checkpoint.string());
  CheckpointSidecar sidecar;
  sidecar.model_config = {{"architecture", kColorKeyArchitecture},
                          {"key_rgb", {k[0], k[1], k[2]}},
                          {"tolerance", stub.tolerance()},
                          {"input_size", {stub.input_size().width, stub.input_size().height}}};
  sidecar.created_at = utc_now();
  sidecar.git_or_version = version_string();
  write_json(sidecar_path(checkpoint), sidecar);
}

CheckpointSidecar read_sidecar(const fs::path& checkpoint) {
  std::ifstream in(sidecar_path(checkpoint));
  if (!in) throw Error(ErrorCode::io_error, "missing checkpoint sidecar " + sidecar_path(checkpoint).string());
  try {
    return json::parse(in).get<CheckpointSidecar>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::io_error, sidecar_path(checkpoint).string() + ": " + e.what());
  }
}

LoadedCheckpoint load_checkpoint(const fs::path& checkpoint) {
  if (!fs::is_regular_file(checkpoint)) throw Error(ErrorCode::io_error, "no checkpoint at " + checkpoint.string());
  LoadedCheckpoint loaded;
  loaded.sidecar = read_sidecar(checkpoint);
  const json& mc = loaded.sidecar.model_config;
  const std::string arch = mc.value("architecture", std::string(kCascadeArchitecture));

  if (arch == kColorKeyArchitecture) {
    const auto key = mc.at("key_rgb").get<std::array<float, 3>>();
    const auto size = mc.at("input_size").get<std::array<int, 2>>();
    loaded.segmenter = std::make_shared<ColorKeySegmenter>(key, mc.at("tolerance").get<float>(),
                                                           Size2{size[0], size[1]});
    return loaded;
  }

  ModelConfig config = mc.get<ModelConfig>();
  // Weights come from the checkpoint itself.
  config.encoder_a.pretrained = config.encoder_b.pretrained = false;
  SegmentationNet net(config);
  try {
    torch::load(net, checkpoint.string());
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::io_error, checkpoint.string() + ": " + e.what_without_backtrace());
  }
  net->eval();
  loaded.net = net;
  loaded.segmenter = std::make_shared<NetworkSegmenter>(net);
  return loaded;
}

void load_optimizer_state(const fs::path& checkpoint, torch::optim::Optimizer& optimizer) {
  const fs::path p = optimizer_path(checkpoint);
  if (!fs::is_regular_file(p)) throw Error(ErrorCode::io_error, "no optimizer state at " + p.string());
  torch::load(optimizer, p.string());
}

}  // namespace lapseg::model
