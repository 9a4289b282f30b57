#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "lapseg/dataset/loader.hpp"
#include "lapseg/dataset/manifest.hpp"
#include "lapseg/metrics/bench.hpp"
#include "lapseg/metrics/report.hpp"
#include "lapseg/model/checkpoint.hpp"
#include "lapseg/training/trainer.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lapseg::cli {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::missing_mask:
    case ErrorCode::unreadable_image:
    case ErrorCode::empty_dataset:
    case ErrorCode::bad_ratios:
    case ErrorCode::crop_larger_than_image:
    case ErrorCode::invalid_manifest:
    case ErrorCode::invalid_config:
    case ErrorCode::weights_unavailable:
    case ErrorCode::incompatible_strides:
    case ErrorCode::empty_list:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

dataset::MaskTensor predict_mask(model::Segmenter& segmenter, const dataset::ImageTensor& image, double threshold) {
  const Size2 native{image.width, image.height};
  const Size2 input = segmenter.input_size();
  const dataset::ImageTensor resized = dataset::resize(image, input);
  const auto [batch, _] = training::to_batch({{resized, dataset::MaskTensor(input.height, input.width)}});
  const torch::Tensor probs = segmenter.predict(batch).to(torch::kCPU, torch::kFloat64).contiguous();
  dataset::MaskTensor mask(input.height, input.width);
  const double* p = probs.data_ptr<double>();
  for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = p[i] >= threshold ? 1 : 0;
  return dataset::resize(mask, native);
}

dataset::ImageTensor overlay(const dataset::ImageTensor& image, const dataset::MaskTensor& mask) {
  if (image.height != mask.height || image.width != mask.width)
    throw Error(ErrorCode::dimension_mismatch, "overlay needs an image and mask of one size");
  dataset::ImageTensor out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (mask.at(y, x))
        for (int c = 0; c < 3; ++c)
          out.at(y, x, c) = (1.0f - kOverlayAlpha) * image.at(y, x, c) + kOverlayAlpha * kOverlayTint[c];
  return out;
}

namespace {

std::string default_device() {
  const char* dev = std::getenv("LAPSEG_DEVICE");
  return dev && *dev ? dev : "cpu";
}

void place_on_device(model::LoadedCheckpoint& ckpt, const std::string& device) {
  if (ckpt.net) ckpt.net->to(torch::Device(device));
}

std::string method_name(const fs::path& checkpoint) { return checkpoint.stem().string(); }

std::vector<double> parse_ratios(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorCode::bad_ratios, "cannot parse ratio '" + part + "'");
    }
  }
  if (out.size() == 2) out.push_back(0.0);
  if (out.size() != 3) throw Error(ErrorCode::bad_ratios, "expected train,val[,test] ratios, got '" + text + "'");
  return out;
}

json augment_override(const std::string& text) {
  if (text == "all" || text == "none") return text;
  json ops = json::array();
  std::stringstream ss(text);
  std::string op;
  while (std::getline(ss, op, ',')) ops.push_back(op);
  return ops;
}

std::vector<fs::path> list_inputs(const fs::path& input) {
  if (fs::is_regular_file(input)) return {input};
  if (!fs::is_directory(input)) throw Error(ErrorCode::invalid_config, "no such input " + input.string());
  static const std::set<std::string> exts = {".png", ".jpg", ".jpeg", ".bmp"};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && exts.count(ext)) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void write_bench_csv(const fs::path& path, const std::string& method, const metrics::BenchResult& r,
                     const metrics::BenchProtocol& p) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  if (fresh) out << "method,fps,median_ms,mean_ms,stddev_ms,batch_size,timed_iters,input_size\n";
  out << method << ',' << metrics::format_value(r.fps) << ',' << metrics::format_value(r.median_ms) << ','
      << metrics::format_value(r.mean_ms) << ',' << metrics::format_value(r.stddev_ms) << ',' << p.batch_size
      << ',' << p.timed_iters << ',' << to_string(p.input_size) << '\n';
}

std::string bench_line(const metrics::BenchResult& r) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "fps=%.2f median_ms=%.3f mean_ms=%.3f stddev_ms=%.3f min_ms=%.3f max_ms=%.3f",
                r.fps, r.median_ms, r.mean_ms, r.stddev_ms, r.min_ms, r.max_ms);
  return buf;
}

struct PrepareArgs {
  std::string root, layout = "paired_dirs", ratios = "0.8,0.1,0.1", out;
  std::uint64_t seed = 0;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  const auto r = parse_ratios(a.ratios);
  dataset::Manifest all = dataset::scan_dataset(a.root, dataset::parse_layout(a.layout));
  const auto [train, val, test] = dataset::split_manifest(all, {r[0], r[1], r[2]}, a.seed);
  const fs::path dir = a.out.empty() ? fs::path(a.root) : fs::path(a.out);
  fs::create_directories(dir);
  dataset::write_manifest_csv(train, dir / "train.csv");
  dataset::write_manifest_csv(val, dir / "val.csv");
  dataset::write_manifest_csv(test, dir / "test.csv");
  out << "train=" << train.size() << " val=" << val.size() << " test=" << test.size() << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string config, train_manifest, val_manifest, run_dir, resume;
  std::optional<int> epochs, batch_size, workers, checkpoint_every;
  std::optional<double> lr, momentum, weight_decay, width_multiplier;
  std::optional<std::int64_t> max_steps;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> optimizer, lr_schedule, device, model_preset, input_size, augment;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  json overrides = json::object();
  auto put = [&](const char* key, const auto& opt) {
    if (opt) overrides[key] = *opt;
  };
  put("epochs", a.epochs);
  put("batch_size", a.batch_size);
  put("workers", a.workers);
  put("checkpoint_every", a.checkpoint_every);
  put("learning_rate", a.lr);
  put("momentum", a.momentum);
  put("weight_decay", a.weight_decay);
  put("width_multiplier", a.width_multiplier);
  put("max_steps", a.max_steps);
  put("seed", a.seed);
  put("optimizer", a.optimizer);
  put("lr_schedule", a.lr_schedule);
  put("device", a.device);
  put("model_preset", a.model_preset);
  put("input_size", a.input_size);
  if (a.augment) overrides["augment"] = augment_override(*a.augment);
  if (!a.train_manifest.empty()) overrides["train_manifest"] = a.train_manifest;
  if (!a.val_manifest.empty()) overrides["val_manifest"] = a.val_manifest;

  const json file = a.config.empty() ? json::object() : load_config_file(a.config);
  // Flags name the preset; a stored full "model" object would otherwise win.
  json file_layer = file;
  if ((a.model_preset || a.width_multiplier || a.input_size) && file_layer.contains("model"))
    file_layer.erase("model");
  RunConfig rc = resolve_config(file_layer, overrides);
  if (!rc.train_manifest) throw Error(ErrorCode::invalid_config, "--train-manifest is required");
  if (!rc.val_manifest) {
    err << "warning: no validation manifest; validating on the training manifest\n";
    rc.val_manifest = rc.train_manifest;
  }

  const fs::path run_dir = a.run_dir;
  fs::create_directories(run_dir);
  write_resolved_config(rc, run_dir / "config.json");

  const auto train_manifest = dataset::read_manifest_csv(*rc.train_manifest);
  const auto val_manifest = dataset::read_manifest_csv(*rc.val_manifest);

  training::seed_everything(rc.train.seed);
  model::SegmentationNet net = model::build_model(rc.model);
  out << "trainable_parameter_count=" << net->trainable_parameter_count() << '\n';

  training::TrainOptions opts;
  opts.run_dir = run_dir;
  if (!a.resume.empty()) opts.resume_from = fs::path(a.resume);
  opts.on_epoch = [&out](const training::EpochRecord& r) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "epoch %lld steps=%lld train_loss=%.6f val_dice=%.6f val_miou=%.6f lr=%g time=%.1fs",
                  (long long)r.epoch, (long long)r.steps, r.train_loss, r.val_dice, r.val_miou, r.learning_rate,
                  r.wall_time_seconds);
    out << buf << std::endl;
  };
  const auto result = training::train(net, train_manifest, val_manifest, rc.train, rc.augmentation, opts);
  if (result.best)
    out << "best checkpoint: " << result.best->path.string() << " (epoch " << result.best->epoch
        << ", val_dice=" << metrics::format_value(result.best->val_dice) << ")\n";
  if (result.final_train) out << "final train " << metrics::summary_line(*result.final_train) << '\n';
  return kExitOk;
}

struct EvaluateArgs {
  std::string checkpoint, manifest, out_json, out_csv, config, method;
  int workers = 1;
  std::string device = default_device();
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  auto ckpt = model::load_checkpoint(a.checkpoint);
  place_on_device(ckpt, a.device);
  if (!a.config.empty()) {
    const RunConfig rc = resolve_config(load_config_file(a.config), json::object());
    if (model::config_hash(rc.model) != model::config_hash(ckpt.sidecar.model_config))
      err << "warning: " << to_string(ErrorCode::config_hash_mismatch)
          << ": checkpoint model config differs from " << a.config << "; using the checkpoint's\n";
  }
  const auto manifest = dataset::read_manifest_csv(a.manifest);
  const metrics::MetricsReport report = training::validate(*ckpt.segmenter, manifest, a.workers);
  if (!a.out_json.empty()) metrics::write_report_json(report, a.out_json);
  if (!a.out_csv.empty()) {
    if (fs::exists(a.out_csv)) fs::remove(a.out_csv);
    metrics::append_table_csv({{a.method.empty() ? method_name(a.checkpoint) : a.method, report}}, a.out_csv);
  }
  out << metrics::summary_line(report) << '\n';
  return kExitOk;
}

struct PredictArgs {
  std::string checkpoint, input, out;
  bool overlay = false;
  double threshold = 0.5;
  std::string device = default_device();
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  auto ckpt = model::load_checkpoint(a.checkpoint);
  place_on_device(ckpt, a.device);
  fs::create_directories(a.out);
  int failed = 0, done = 0;
  for (const fs::path& file : list_inputs(a.input)) {
    try {
      const dataset::ImageTensor image = dataset::read_image(file);
      const dataset::MaskTensor mask = predict_mask(*ckpt.segmenter, image, a.threshold);
      const std::string stem = file.stem().string();
      dataset::write_mask_png(mask, fs::path(a.out) / (stem + "_mask.png"));
      if (a.overlay) dataset::write_image_png(overlay(image, mask), fs::path(a.out) / (stem + "_overlay.png"));
      ++done;
    } catch (const std::exception& e) {
      err << "error: " << file.string() << ": " << e.what() << '\n';
      ++failed;
    }
  }
  out << "predicted=" << done << " failed=" << failed << '\n';
  return failed ? kExitFailure : kExitOk;
}

struct BenchArgs {
  std::string checkpoint, config, out_csv, method, statistic;
  std::optional<int> batch_size, warmup_iters, timed_iters;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> input_size;
  std::string device = default_device();
};

metrics::BenchProtocol bench_protocol(const std::string& config, const json& overrides, Size2 model_input) {
  const json file = config.empty() ? json::object() : load_config_file(config);
  RunConfig rc = resolve_config(file, overrides);
  if (!overrides.contains("input_size") && !file.contains("input_size")) rc.bench.input_size = model_input;
  rc.bench.validate();
  return rc.bench;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  json overrides = json::object();
  if (a.batch_size) overrides["bench_batch_size"] = *a.batch_size;
  if (a.warmup_iters) overrides["warmup_iters"] = *a.warmup_iters;
  if (a.timed_iters) overrides["timed_iters"] = *a.timed_iters;
  if (a.seed) overrides["bench_seed"] = *a.seed;
  if (!a.statistic.empty()) overrides["statistic"] = a.statistic;
  if (a.input_size) overrides["input_size"] = *a.input_size;
  // Validate the protocol before paying for a checkpoint load.
  metrics::BenchProtocol protocol = bench_protocol(a.config, overrides, kDefaultTargetSize);

  auto ckpt = model::load_checkpoint(a.checkpoint);
  place_on_device(ckpt, a.device);
  protocol = bench_protocol(a.config, overrides, ckpt.segmenter->input_size());
  const metrics::BenchResult r = metrics::fps_benchmark(*ckpt.segmenter, protocol);
  out << bench_line(r) << '\n';
  if (!a.out_csv.empty())
    write_bench_csv(a.out_csv, a.method.empty() ? method_name(a.checkpoint) : a.method, r, protocol);
  return kExitOk;
}

struct CompareArgs {
  std::vector<std::string> checkpoints, names;
  std::string manifest, out, config;
  std::optional<int> warmup_iters, timed_iters;
  int workers = 1;
  std::string device = default_device();
};

int cmd_compare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.names.empty() && a.names.size() != a.checkpoints.size())
    throw Error(ErrorCode::invalid_config, "--names must match --checkpoints one to one");
  json overrides = json::object();
  if (a.warmup_iters) overrides["warmup_iters"] = *a.warmup_iters;
  if (a.timed_iters) overrides["timed_iters"] = *a.timed_iters;
  (void)bench_protocol(a.config, overrides, kDefaultTargetSize);
  const auto manifest = dataset::read_manifest_csv(a.manifest);

  std::vector<metrics::TableRow> rows;
  int failed = 0;
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
    const fs::path path = a.checkpoints[i];
    try {
      auto ckpt = model::load_checkpoint(path);
      place_on_device(ckpt, a.device);
      metrics::MetricsReport report = training::validate(*ckpt.segmenter, manifest, a.workers);
      const auto protocol = bench_protocol(a.config, overrides, ckpt.segmenter->input_size());
      report.fps = metrics::fps_benchmark(*ckpt.segmenter, protocol).fps;
      rows.push_back({a.names.empty() ? method_name(path) : a.names[i], report});
    } catch (const std::exception& e) {
      err << "error: " << path.string() << ": " << e.what() << '\n';
      ++failed;
    }
  }

  const fs::path dir = a.out;
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "comparison.csv");
    metrics::write_table_csv(rows, csv);
  }
  {
    std::ofstream md(dir / "comparison.md");
    metrics::write_table_markdown(rows, md);
  }
  metrics::write_table_markdown(rows, out);
  return failed ? kExitFailure : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Surgical instrument segmentation: data preparation, training, evaluation and benchmarking",
               "lapseg"};
  app.set_version_flag("--version", model::version_string());
  app.require_subcommand(1);

  PrepareArgs pa;
  auto* prepare = app.add_subcommand("prepare", "Scan a dataset root and write train/val/test manifests");
  prepare->add_option("--root", pa.root, "Dataset root")->required();
  prepare->add_option("--layout", pa.layout, "paired_dirs or manifest_csv")->capture_default_str();
  prepare->add_option("--ratios", pa.ratios, "train,val,test fractions")->capture_default_str();
  prepare->add_option("--seed", pa.seed, "Shuffle seed")->capture_default_str();
  prepare->add_option("--out", pa.out, "Output directory (default: the root)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", ta.config, "Flat JSON config file");
  train->add_option("--train-manifest", ta.train_manifest, "Training manifest CSV");
  train->add_option("--val-manifest", ta.val_manifest, "Validation manifest CSV");
  train->add_option("--run-dir", ta.run_dir, "Output directory")->required();
  train->add_option("--resume", ta.resume, "Checkpoint to resume from");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--batch-size", ta.batch_size);
  train->add_option("--workers", ta.workers);
  train->add_option("--checkpoint-every", ta.checkpoint_every);
  train->add_option("--lr", ta.lr);
  train->add_option("--momentum", ta.momentum);
  train->add_option("--weight-decay", ta.weight_decay);
  train->add_option("--max-steps", ta.max_steps);
  train->add_option("--seed", ta.seed);
  train->add_option("--optimizer", ta.optimizer, "sgd or adam");
  train->add_option("--lr-schedule", ta.lr_schedule, "constant or reduce_on_plateau");
  train->add_option("--device", ta.device, "Default: $LAPSEG_DEVICE or cpu");
  train->add_option("--model-preset", ta.model_preset, "full or tiny");
  train->add_option("--width-multiplier", ta.width_multiplier);
  train->add_option("--input-size", ta.input_size, "WIDTHxHEIGHT");
  train->add_option("--augment", ta.augment, "all, none or a comma-separated op list");

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a manifest");
  evaluate->add_option("--checkpoint", ea.checkpoint)->required();
  evaluate->add_option("--manifest", ea.manifest)->required();
  evaluate->add_option("--out-json", ea.out_json);
  evaluate->add_option("--out-csv", ea.out_csv);
  evaluate->add_option("--config", ea.config, "Warn when its model config differs from the checkpoint's");
  evaluate->add_option("--method", ea.method, "Row name in the CSV (default: checkpoint file stem)");
  evaluate->add_option("--workers", ea.workers)->capture_default_str();
  evaluate->add_option("--device", ea.device)->capture_default_str();

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Write binary mask PNGs for images");
  predict->add_option("--checkpoint", pr.checkpoint)->required();
  predict->add_option("--input", pr.input, "Image file or directory")->required();
  predict->add_option("--out", pr.out, "Output directory")->required();
  predict->add_flag("--overlay", pr.overlay, "Also write tinted overlays");
  predict->add_option("--threshold", pr.threshold)->capture_default_str();
  predict->add_option("--device", pr.device)->capture_default_str();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Measure inference throughput");
  bench->add_option("--checkpoint", ba.checkpoint)->required();
  bench->add_option("--config", ba.config);
  bench->add_option("--batch-size", ba.batch_size);
  bench->add_option("--warmup-iters", ba.warmup_iters);
  bench->add_option("--timed-iters", ba.timed_iters, "At least 10");
  bench->add_option("--statistic", ba.statistic, "median or mean");
  bench->add_option("--seed", ba.seed);
  bench->add_option("--input-size", ba.input_size, "WIDTHxHEIGHT (default: the model's)");
  bench->add_option("--out-csv", ba.out_csv, "Append the result to this CSV");
  bench->add_option("--method", ba.method);
  bench->add_option("--device", ba.device)->capture_default_str();

  CompareArgs ca;
  auto* compare = app.add_subcommand("compare", "Evaluate and benchmark several checkpoints into one table");
  compare->add_option("--checkpoints", ca.checkpoints)->required()->expected(1, -1);
  compare->add_option("--names", ca.names, "Row names, one per checkpoint")->expected(1, -1);
  compare->add_option("--manifest", ca.manifest)->required();
  compare->add_option("--out", ca.out, "Output directory")->required();
  compare->add_option("--config", ca.config);
  compare->add_option("--warmup-iters", ca.warmup_iters);
  compare->add_option("--timed-iters", ca.timed_iters);
  compare->add_option("--workers", ca.workers)->capture_default_str();
  compare->add_option("--device", ca.device)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*prepare) return cmd_prepare(pa, out);
    if (*train) return cmd_train(ta, out, err);
    if (*evaluate) return cmd_evaluate(ea, out, err);
    if (*predict) return cmd_predict(pr, out, err);
    if (*bench) return cmd_bench(ba, out);
    if (*compare) return cmd_compare(ca, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace lapseg::cli
