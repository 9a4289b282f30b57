#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>

#include "cli.hpp"
#include "lapseg/dataset/image.hpp"
#include "lapseg/metrics/report.hpp"
#include "lapseg/model/checkpoint.hpp"
#include "lapseg/training/trainer.hpp"
#include "run_config.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace lapseg;
namespace lt = lapseg::testing;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n - 1;
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

constexpr Size2 kInput{64, 64};

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new lt::TempDir("cli");
    lt::write_synthetic_dataset(root(), {8, kInput, 41, 2});
    const CliRun r = run({"prepare", "--root", root().string(), "--ratios", "1,0,0", "--out", (dir_->path() / "m").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    model::save_color_key_checkpoint(oracle_ckpt(), lt::oracle_segmenter(kInput));
    training::seed_everything(0);
    auto net = model::build_model(model::ModelConfig::tiny(0.125, kInput));
    model::zero_head(*net);
    model::save_checkpoint(zero_ckpt(), net, {});
  }
  static void TearDownTestSuite() { delete dir_; }

  static fs::path root() { return dir_->path() / "data"; }
  static fs::path manifest() { return dir_->path() / "m" / "train.csv"; }
  static fs::path oracle_ckpt() { return dir_->path() / "oracle.ckpt"; }
  static fs::path zero_ckpt() { return dir_->path() / "zero.ckpt"; }

  static lt::TempDir* dir_;
};

lt::TempDir* CliTest::dir_ = nullptr;

}  // namespace

TEST(CliBasics, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  for (const char* sub : {"prepare", "train", "evaluate", "predict", "bench", "compare"}) {
    const CliRun r = run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"evaluate", "--manifest", "x.csv"}).code, cli::kExitUsage);
}

TEST(CliPrepare, ReferenceSplitSizes) {
  lt::TempDir dir("cli5983");
  const dataset::ImageTensor img(2, 2);
  const dataset::MaskTensor mask(2, 2);
  fs::create_directories(dir / "images/a");
  fs::create_directories(dir / "masks/a");
  for (int i = 0; i < 5983; ++i) {
    dataset::write_image_png(img, dir / ("images/a/" + std::to_string(i) + ".png"));
    dataset::write_mask_png(mask, dir / ("masks/a/" + std::to_string(i) + ".png"));
  }
  const CliRun r = run({"prepare", "--root", dir.path().string(), "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("train=4787 val=598 test=598"), std::string::npos) << r.out;
  EXPECT_EQ(csv_rows(dir / "out/train.csv"), 4787u);
}

TEST_F(CliTest, PrepareRatiosDeterminismAndErrors) {
  EXPECT_EQ(csv_rows(manifest()), 8u);
  EXPECT_EQ(csv_rows(dir_->path() / "m/val.csv"), 0u);

  const auto a = dir_->path() / "pa", b = dir_->path() / "pb";
  ASSERT_EQ(run({"prepare", "--root", root().string(), "--seed", "4", "--out", a.string()}).code, 0);
  ASSERT_EQ(run({"prepare", "--root", root().string(), "--seed", "4", "--out", b.string()}).code, 0);
  for (const char* f : {"train.csv", "val.csv", "test.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;

  lt::TempDir empty("cli_empty");
  fs::create_directories(empty / "images");
  fs::create_directories(empty / "masks");
  EXPECT_EQ(run({"prepare", "--root", empty.path().string()}).code, cli::kExitUsage);

  lt::TempDir broken("cli_broken");
  lt::write_synthetic_dataset(broken.path(), {3, {32, 32}, 1, 1});
  fs::remove(broken / "masks/proc0/frame_0002.png");
  const CliRun r = run({"prepare", "--root", broken.path().string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("frame_0002"), std::string::npos) << r.err;

  EXPECT_EQ(run({"prepare", "--root", root().string(), "--ratios", "0.5,0.1"}).code, cli::kExitUsage);
}

TEST_F(CliTest, TrainRequiresManifest) {
  const CliRun r = run({"train", "--run-dir", (dir_->path() / "nomanifest").string(), "--model-preset", "tiny"});
  EXPECT_EQ(r.code, cli::kExitUsage);
}

TEST_F(CliTest, TrainFlagsOverrideConfigFile) {
  const auto cfg = dir_->path() / "cfg_epochs.json";
  write_json(cfg, {{"model_preset", "tiny"}, {"input_size", "64x64"}, {"epochs", 100}, {"batch_size", 8},
                   {"augment", "none"}, {"final_train_eval", false}});
  const auto run_dir = dir_->path() / "run_epochs";
  const CliRun r = run({"train", "--config", cfg.string(), "--train-manifest", manifest().string(), "--val-manifest",
                     manifest().string(), "--run-dir", run_dir.string(), "--epochs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(csv_rows(run_dir / "train_log.jsonl"), 0u);  // one line, no header
  const auto resolved = nlohmann::json::parse(slurp(run_dir / "config.json"));
  EXPECT_EQ(resolved.at("epochs"), 1);
  EXPECT_EQ(resolved.at("batch_size"), 8);
  EXPECT_EQ(resolved.at("model").at("input_size"), nlohmann::json::array({64, 64}));
}

TEST_F(CliTest, TrainOverfitsAndWritesRunDirectory) {
  const auto run_dir = dir_->path() / "run_overfit";
  const CliRun r = run({"train", "--train-manifest", manifest().string(), "--val-manifest", manifest().string(),
                     "--run-dir", run_dir.string(), "--model-preset", "tiny", "--input-size", "64x64", "--batch-size",
                     "4", "--lr", "0.01", "--max-steps", "200", "--epochs", "100", "--augment", "none"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(run_dir / "checkpoints/best.ckpt"));
  EXPECT_TRUE(fs::exists(run_dir / "config.json"));
  EXPECT_TRUE(fs::exists(run_dir / "train_log.jsonl"));
  const auto summary = nlohmann::json::parse(slurp(run_dir / "summary.json"));
  EXPECT_GE(summary.at("final_train").at("dice").get<double>(), 0.95);
  EXPECT_NE(r.out.find("final train dice="), std::string::npos);
}

TEST_F(CliTest, EvaluateOracleAndCrossFormatAgreement) {
  const auto json_path = dir_->path() / "eval/oracle.json", csv_path = dir_->path() / "eval/oracle.csv";
  const CliRun r = run({"evaluate", "--checkpoint", oracle_ckpt().string(), "--manifest", manifest().string(),
                     "--out-json", json_path.string(), "--out-csv", csv_path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = metrics::read_report_json(json_path);
  for (double v : {report.dice, report.miou, report.recall, report.precision, report.f2, report.accuracy})
    EXPECT_EQ(v, 1.0);
  EXPECT_NE(r.out.find("dice=1.000000"), std::string::npos);

  // Non-trivial numbers for the cross-format check.
  const auto zj = dir_->path() / "eval/zero.json", zc = dir_->path() / "eval/zero.csv";
  ASSERT_EQ(run({"evaluate", "--checkpoint", zero_ckpt().string(), "--manifest", manifest().string(), "--out-json",
                 zj.string(), "--out-csv", zc.string()})
                .code,
            0);
  const auto from_json = metrics::read_report_json(zj);
  const auto rows = metrics::read_table_csv(zc);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].method, "zero");
  EXPECT_EQ(rows[0].report.dice, from_json.dice);
  EXPECT_EQ(rows[0].report.precision, from_json.precision);
  EXPECT_EQ(rows[0].report.accuracy, from_json.accuracy);
  EXPECT_LT(from_json.precision, 1.0);

  // Same numbers as the library call.
  auto loaded = model::load_checkpoint(zero_ckpt());
  auto lib = training::validate(*loaded.segmenter, dataset::read_manifest_csv(manifest()));
  lib.fps.reset();
  EXPECT_EQ(lib, from_json);
}

TEST_F(CliTest, EvaluateEmptyFramesScoreOne) {
  lt::TempDir empty("cli_emptymasks");
  lt::write_synthetic_dataset(empty.path(), {3, kInput, 5, 1, false, true});
  ASSERT_EQ(run({"prepare", "--root", empty.path().string(), "--ratios", "1,0,0"}).code, 0);
  const auto out = empty / "r.json";
  ASSERT_EQ(run({"evaluate", "--checkpoint", oracle_ckpt().string(), "--manifest", (empty / "train.csv").string(),
                 "--out-json", out.string()})
                .code,
            0);
  EXPECT_EQ(metrics::read_report_json(out).dice, 1.0);
}

TEST_F(CliTest, EvaluateWarnsOnConfigMismatch) {
  const auto cfg = dir_->path() / "cfg_full.json";
  write_json(cfg, {{"model_preset", "full"}, {"pretrained", false}});
  const CliRun r = run({"evaluate", "--checkpoint", zero_ckpt().string(), "--manifest", manifest().string(), "--config",
                     cfg.string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("ConfigHashMismatch"), std::string::npos) << r.err;
}

TEST_F(CliTest, PredictWritesNativeSizeBinaryMasks) {
  lt::TempDir in("cli_predict_in");
  dataset::ImageTensor frame(540, 960);
  for (std::size_t i = 0; i < frame.data.size(); ++i) frame.data[i] = float((i * 37) % 255) / 255.0f;
  dataset::write_image_png(frame, in / "frame.png");
  std::ofstream(in / "broken.png") << "garbage";

  const auto out = dir_->path() / "pred";
  const CliRun r = run({"predict", "--checkpoint", zero_ckpt().string(), "--input", in.path().string(), "--out",
                     out.string(), "--overlay"});
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("broken.png"), std::string::npos);
  const cv::Mat mask = cv::imread((out / "frame_mask.png").string(), cv::IMREAD_UNCHANGED);
  ASSERT_FALSE(mask.empty());
  EXPECT_EQ(mask.cols, 960);
  EXPECT_EQ(mask.rows, 540);
  EXPECT_EQ(mask.channels(), 1);
  EXPECT_EQ(cv::countNonZero(mask != 255), 0);
  EXPECT_TRUE(fs::exists(out / "frame_overlay.png"));
}

TEST_F(CliTest, PredictMaskRoundTrip) {
  const auto out = dir_->path() / "pred_oracle";
  const auto first = dataset::read_manifest_csv(manifest()).records.front();
  ASSERT_EQ(run({"predict", "--checkpoint", oracle_ckpt().string(), "--input", first.image_path.string(), "--out",
                 out.string()})
                .code,
            0);
  auto loaded = model::load_checkpoint(oracle_ckpt());
  const auto expected = cli::predict_mask(*loaded.segmenter, dataset::read_image(first.image_path));
  const auto written = dataset::binarize_mask(
      dataset::read_raw_mask(out / (first.image_path.stem().string() + "_mask.png")));
  EXPECT_EQ(written, expected);
  EXPECT_EQ(written, dataset::binarize_mask(dataset::read_raw_mask(first.mask_path)));
}

TEST_F(CliTest, BenchPrintsFpsAndRejectsShortRuns) {
  const CliRun bad = run({"bench", "--checkpoint", zero_ckpt().string(), "--timed-iters", "5"});
  EXPECT_EQ(bad.code, cli::kExitUsage);
  const auto csv = dir_->path() / "bench.csv";
  const CliRun r = run({"bench", "--checkpoint", zero_ckpt().string(), "--warmup-iters", "2", "--timed-iters", "10",
                     "--out-csv", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.out.find("fps=");
  ASSERT_NE(pos, std::string::npos);
  const double fps = std::stod(r.out.substr(pos + 4));
  EXPECT_GT(fps, 0.0);
  EXPECT_TRUE(std::isfinite(fps));
  EXPECT_EQ(csv_rows(csv), 1u);
}

TEST_F(CliTest, CompareMarksOracleBest) {
  const auto out = dir_->path() / "cmp";
  const CliRun r = run({"compare", "--checkpoints", oracle_ckpt().string(), zero_ckpt().string(), "--manifest",
                     manifest().string(), "--out", out.string(), "--warmup-iters", "1", "--timed-iters", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = metrics::read_table_csv(out / "comparison.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].method, "oracle");
  EXPECT_EQ(rows[0].report.dice, 1.0);
  EXPECT_TRUE(rows[0].report.fps);
  std::ifstream csv(out / "comparison.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "method,dice,miou,recall,precision,f2,accuracy,fps");
  EXPECT_NE(slurp(out / "comparison.md").find("| oracle | **1.0000** |"), std::string::npos);
}

TEST_F(CliTest, CompareSingleRowMatchesEvaluate) {
  const auto out = dir_->path() / "cmp1";
  ASSERT_EQ(run({"compare", "--checkpoints", zero_ckpt().string(), "--manifest", manifest().string(), "--out",
                 out.string(), "--timed-iters", "10", "--warmup-iters", "1"})
                .code,
            0);
  const auto ej = dir_->path() / "cmp1_eval.json";
  ASSERT_EQ(run({"evaluate", "--checkpoint", zero_ckpt().string(), "--manifest", manifest().string(), "--out-json",
                 ej.string()})
                .code,
            0);
  const auto row = metrics::read_table_csv(out / "comparison.csv").at(0).report;
  const auto ev = metrics::read_report_json(ej);
  EXPECT_EQ(row.dice, ev.dice);
  EXPECT_EQ(row.miou, ev.miou);
  EXPECT_EQ(row.f2, ev.f2);
}

TEST_F(CliTest, ComparePartialFailureStillWritesTable) {
  const auto out = dir_->path() / "cmp_partial";
  const CliRun r = run({"compare", "--checkpoints", oracle_ckpt().string(), (dir_->path() / "missing.ckpt").string(),
                     "--manifest", manifest().string(), "--out", out.string(), "--timed-iters", "10"});
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_EQ(metrics::read_table_csv(out / "comparison.csv").size(), 1u);
}

TEST(RunConfig, LayeringAndUnknownKeys) {
  const auto rc = cli::resolve_config({{"epochs", 7}, {"model_preset", "tiny"}}, {{"epochs", 3}});
  EXPECT_EQ(rc.train.epochs, 3);
  EXPECT_EQ(rc.model.encoder_a.backbone_id, model::BackboneId::tiny_reference);
  EXPECT_EQ(rc.resolved.at("epochs"), 3);
  EXPECT_THROW(cli::resolve_config({{"epoch", 7}}, nlohmann::json::object()), Error);
}

TEST(RunConfig, DeviceDefaultsFromEnvironment) {
  ::setenv("LAPSEG_DEVICE", "cpu", 1);
  EXPECT_EQ(cli::default_config_json().at("device"), "cpu");
  ::setenv("LAPSEG_DEVICE", "bogus", 1);
  EXPECT_EQ(cli::default_config_json().at("device"), "bogus");
  EXPECT_THROW(cli::resolve_config(nlohmann::json::object(), nlohmann::json::object()), Error);
  ::unsetenv("LAPSEG_DEVICE");
}
