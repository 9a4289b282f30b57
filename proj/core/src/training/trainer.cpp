#include "lapseg/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <new>
#include <numeric>

#include "lapseg/error.hpp"
#include "lapseg/metrics/dice_loss.hpp"
#include "lapseg/metrics/report.hpp"
#include "lapseg/model/checkpoint.hpp"
#include "lapseg/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lapseg::training {

namespace {

// Domain tag so shuffling seeds never collide with augmentation seeds.
constexpr std::uint64_t kShuffleTag = 0x5348554646ULL;

std::unique_ptr<torch::optim::Optimizer> make_optimizer(model::SegmentationNet& net, const TrainConfig& c) {
  std::vector<torch::Tensor> params;
  for (auto& p : net->parameters())
    if (p.requires_grad()) params.push_back(p);
  if (c.optimizer == OptimizerKind::adam)
    return std::make_unique<torch::optim::Adam>(
        params, torch::optim::AdamOptions(c.learning_rate).weight_decay(c.weight_decay));
  return std::make_unique<torch::optim::SGD>(
      params, torch::optim::SGDOptions(c.learning_rate).momentum(c.momentum).weight_decay(c.weight_decay));
}

void set_learning_rate(torch::optim::Optimizer& opt, double lr) {
  for (auto& group : opt.param_groups()) group.options().set_lr(lr);
}

void append_line(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << j.dump() << '\n';
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

bool is_oom(const c10::Error& e) { return std::strstr(e.what(), "out of memory") != nullptr; }

}  // namespace

void to_json(json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"train_loss", r.train_loss},
       {"val_dice", r.val_dice},
       {"val_miou", r.val_miou},
       {"learning_rate", r.learning_rate},
       {"wall_time_seconds", r.wall_time_seconds},
       {"steps", r.steps}};
}

void from_json(const json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<std::int64_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.val_dice = j.at("val_dice").get<double>();
  r.val_miou = j.at("val_miou").get<double>();
  r.learning_rate = j.at("learning_rate").get<double>();
  r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
  r.steps = j.value("steps", std::int64_t{0});
}

void seed_everything(std::uint64_t seed) {
  torch::manual_seed(seed);
  if (torch::cuda::is_available()) torch::cuda::manual_seed_all(seed);
}

std::pair<torch::Tensor, torch::Tensor> to_batch(const std::vector<dataset::Sample>& samples) {
  if (samples.empty()) throw Error(ErrorCode::empty_list, "empty batch");
  const int h = samples.front().first.height, w = samples.front().first.width;
  const auto b = std::int64_t(samples.size());
  torch::Tensor images = torch::empty({b, h, w, 3}, torch::kFloat32);
  torch::Tensor masks = torch::empty({b, 1, h, w}, torch::kUInt8);
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& [img, mask] = samples[std::size_t(i)];
    if (img.height != h || img.width != w || mask.height != h || mask.width != w)
      throw Error(ErrorCode::shape_mismatch, "samples in a batch must share one size");
    std::memcpy(images[i].data_ptr<float>(), img.data.data(), img.data.size() * sizeof(float));
    std::memcpy(masks[i].data_ptr<std::uint8_t>(), mask.data.data(), mask.data.size());
  }
  return {images.permute({0, 3, 1, 2}).contiguous(), masks.to(torch::kFloat32)};
}

metrics::MetricsReport validate(model::Segmenter& segmenter, const dataset::SampleLoader& loader,
                                int batch_size) {
  if (loader.size() == 0) throw Error(ErrorCode::empty_list, "validation manifest is empty");
  if (batch_size < 1) throw Error(ErrorCode::invalid_config, "batch_size must be >= 1");
  std::vector<metrics::MetricsReport> frames;
  frames.reserve(loader.size());
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < loader.size(); start += std::size_t(batch_size)) {
    const std::size_t end = std::min(loader.size(), start + std::size_t(batch_size));
    indices.resize(end - start);
    std::iota(indices.begin(), indices.end(), start);
    const auto samples = loader.load_batch(indices, 0);
    const auto [images, _] = to_batch(samples);
    const torch::Tensor probs = segmenter.predict(images).to(torch::kCPU, torch::kFloat64).contiguous();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const torch::Tensor p = probs[std::int64_t(i)];
      const auto& mask = samples[i].second;
      if (p.numel() != std::int64_t(mask.data.size()))
        throw Error(ErrorCode::shape_mismatch, "prediction size differs from mask size");
      const auto counts = metrics::confusion(std::span<const double>(p.data_ptr<double>(), std::size_t(p.numel())),
                                             std::span<const std::uint8_t>(mask.data));
      frames.push_back(metrics::metrics_from_counts(counts));
    }
  }
  return metrics::aggregate_metrics(frames);
}

metrics::MetricsReport validate(model::Segmenter& segmenter, const dataset::Manifest& manifest, int workers) {
  if (manifest.empty()) throw Error(ErrorCode::empty_list, "validation manifest is empty");
  dataset::SampleLoader loader(manifest, {segmenter.input_size(), std::nullopt, workers, false});
  return validate(segmenter, loader, 1);
}

TrainResult train(model::SegmentationNet net, const dataset::Manifest& train_manifest,
                  const dataset::Manifest& val_manifest, const TrainConfig& config,
                  const std::optional<dataset::AugmentationConfig>& aug, const TrainOptions& options) {
  config.validate();
  if (!net) throw Error(ErrorCode::invalid_config, "model is not built");
  if (train_manifest.empty()) throw Error(ErrorCode::empty_dataset, "training manifest is empty");
  if (val_manifest.empty()) throw Error(ErrorCode::empty_dataset, "validation manifest is empty");

  const torch::Device device(config.device);
  net->to(device);
  const Size2 input = net->config().input_size;

  std::optional<dataset::AugmentationConfig> train_aug = aug;
  if (train_aug) train_aug->seed = config.seed;
  dataset::SampleLoader train_loader(train_manifest, {input, train_aug, config.workers, config.cache});
  dataset::SampleLoader val_loader(val_manifest, {input, std::nullopt, config.workers, config.cache});
  model::NetworkSegmenter segmenter(net);

  auto optimizer = make_optimizer(net, config);
  model::TrainingState state;
  state.learning_rate = config.learning_rate;
  state.best_val_dice = -1.0;

  const bool persist = !options.run_dir.empty();
  const fs::path ckpt_dir = options.run_dir / "checkpoints";
  const fs::path log_path = options.run_dir / "train_log.jsonl";
  const std::string config_hash = model::config_hash(net->config());

  TrainResult result;
  if (options.resume_from) {
    const fs::path& from = *options.resume_from;
    const auto sidecar = model::read_sidecar(from);
    if (model::config_hash(sidecar.model_config) != config_hash)
      throw Error(ErrorCode::config_hash_mismatch, "checkpoint " + from.string() + " was written for another model");
    torch::load(net, from.string());
    net->to(device);
    if (fs::exists(model::optimizer_path(from))) model::load_optimizer_state(from, *optimizer);
    state = sidecar.training_state;
    set_learning_rate(*optimizer, state.learning_rate);
    if (persist && fs::exists(ckpt_dir / "best.ckpt")) {
      const auto best = model::read_sidecar(ckpt_dir / "best.ckpt");
      result.best = CheckpointRecord{ckpt_dir / "best.ckpt", best.training_state.epoch,
                                     best.training_state.best_val_dice, config_hash};
    }
  }

  if (persist) {
    fs::create_directories(ckpt_dir);
    if (!options.resume_from) fs::remove(log_path);
  }

  const auto n = train_manifest.size();
  const auto batches_per_epoch = (n + std::size_t(config.batch_size) - 1) / std::size_t(config.batch_size);
  auto steps_left = [&] { return !config.max_steps || state.global_step < *config.max_steps; };

  for (std::int64_t epoch = state.epoch + 1; epoch <= config.epochs && steps_left(); ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = permutation(n, derive_seed({config.seed, kShuffleTag, std::uint64_t(epoch)}));
    net->train();
    double loss_sum = 0.0;
    std::int64_t epoch_steps = 0;

    for (std::size_t b = 0; b < batches_per_epoch && steps_left(); ++b) {
      const std::size_t start = b * std::size_t(config.batch_size);
      const std::size_t end = std::min(n, start + std::size_t(config.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      double loss_value = 0.0;
      try {
        auto [images, masks] = to_batch(train_loader.load_batch(idx, std::uint64_t(epoch)));
        images = images.to(device);
        masks = masks.to(device);
        optimizer->zero_grad();
        const torch::Tensor probs = net->forward(images);
        const torch::Tensor loss = metrics::dice_loss(probs, masks, config.loss);
        loss_value = loss.item<double>();
        if (!std::isfinite(loss_value))
          throw Error(ErrorCode::non_finite_loss, "loss " + std::to_string(loss_value) + " at epoch " +
                                                      std::to_string(epoch) + " batch " + std::to_string(b));
        loss.backward();
        optimizer->step();
      } catch (const std::bad_alloc&) {
        throw Error(ErrorCode::out_of_memory, "allocation failed at batch size " + std::to_string(idx.size()));
      } catch (const c10::Error& e) {
        if (is_oom(e))
          throw Error(ErrorCode::out_of_memory, "device memory exhausted at batch size " + std::to_string(idx.size()));
        throw;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::non_finite_activation)
          throw Error(ErrorCode::non_finite_loss, std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                                      " batch " + std::to_string(b));
        throw;
      }
      result.log.step_losses.push_back(loss_value);
      loss_sum += loss_value;
      ++epoch_steps;
      ++state.global_step;
    }

    const metrics::MetricsReport val = validate(segmenter, val_loader, config.batch_size);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_steps ? loss_sum / double(epoch_steps) : 0.0;
    rec.val_dice = val.dice;
    rec.val_miou = val.miou;
    rec.learning_rate = state.learning_rate;
    rec.steps = epoch_steps;
    rec.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    state.epoch = epoch;
    const bool improved = val.dice > state.best_val_dice;
    if (improved) {
      state.best_val_dice = val.dice;
      state.plateau_bad_epochs = 0;
    } else if (config.lr_schedule == LrSchedule::reduce_on_plateau &&
               ++state.plateau_bad_epochs > config.plateau_patience) {
      state.learning_rate *= config.plateau_factor;
      state.plateau_bad_epochs = 0;
      set_learning_rate(*optimizer, state.learning_rate);
    }

    if (persist) {
      append_line(log_path, rec);
      const bool last = epoch == config.epochs || !steps_left();
      if (epoch % config.checkpoint_every == 0 || last)
        model::save_checkpoint(ckpt_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"), net, state, optimizer.get());
      if (improved) model::save_checkpoint(ckpt_dir / "best.ckpt", net, state, optimizer.get());
    }
    if (improved) result.best = CheckpointRecord{ckpt_dir / "best.ckpt", epoch, val.dice, config_hash};
    result.log.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }

  if (config.final_train_eval) {
    dataset::SampleLoader eval_loader(train_manifest, {input, std::nullopt, config.workers, false});
    result.final_train = validate(segmenter, eval_loader, config.batch_size);
  }
  if (persist) {
    json summary = {{"epochs_run", result.log.epochs.size()},
                    {"global_step", state.global_step},
                    {"best", result.best ? json{{"path", result.best->path.string()},
                                                {"epoch", result.best->epoch},
                                                {"val_dice", result.best->val_dice},
                                                {"model_config_hash", result.best->model_config_hash}}
                                         : json(nullptr)}};
    if (result.final_train) summary["final_train"] = *result.final_train;
    write_json_file(options.run_dir / "summary.json", summary);
  }

  result.model = net;
  result.train_augmentation = train_loader.stats();
  result.val_augmentation = val_loader.stats();
  return result;
}

}  // namespace lapseg::training
