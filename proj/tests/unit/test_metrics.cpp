#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "lapseg/error.hpp"
#include "lapseg/metrics/bench.hpp"
#include "lapseg/metrics/confusion.hpp"
#include "lapseg/metrics/dice_loss.hpp"
#include "lapseg/metrics/report.hpp"
#include "lapseg/random.hpp"
#include "synthetic.hpp"

using namespace lapseg;
namespace lt = lapseg::testing;
using namespace lapseg::metrics;

namespace {

template <typename Fn>
ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an lapseg::Error";
  return ErrorCode::io_error;
}

struct Frame {
  std::vector<double> pred;
  std::vector<std::uint8_t> target;
};

Frame random_frame(std::uint64_t seed, int n = 256) {
  Rng rng(seed);
  Frame f;
  const double fg = rng.uniform(0.0, 0.6);
  for (int i = 0; i < n; ++i) {
    f.pred.push_back(rng.uniform());
    f.target.push_back(rng.bernoulli(fg) ? 1 : 0);
  }
  return f;
}

}  // namespace

TEST(Confusion, ThresholdEdges) {
  const std::vector<std::uint8_t> ones(16, 1);
  const std::vector<float> full(16, 1.0f), below(16, 0.49f), at(16, 0.5f);
  EXPECT_EQ(confusion(full, ones), (ConfusionCounts{16, 0, 0, 0}));
  EXPECT_EQ(confusion(below, ones), (ConfusionCounts{0, 0, 16, 0}));
  EXPECT_EQ(confusion(at, ones), (ConfusionCounts{16, 0, 0, 0}));
}

TEST(Confusion, MatchesPixelLoop) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Frame f = random_frame(s);
    ConfusionCounts loop;
    for (std::size_t i = 0; i < f.pred.size(); ++i) {
      const bool p = f.pred[i] >= 0.5, g = f.target[i] == 1;
      loop.tp += p && g;
      loop.fp += p && !g;
      loop.fn += !p && g;
      loop.tn += !p && !g;
    }
    const auto c = confusion(f.pred, f.target);
    EXPECT_EQ(c, loop);
    EXPECT_EQ(c.total(), 256u);
  }
}

TEST(Confusion, ShapeMismatchAndNonBinary) {
  const std::vector<float> p(4, 0.5f);
  const std::vector<std::uint8_t> t3(3, 1), t4{0, 1, 2, 0};
  EXPECT_EQ(error_code_of([&] { confusion(p, t3); }), ErrorCode::shape_mismatch);
  EXPECT_EQ(error_code_of([&] { confusion(p, t4); }), ErrorCode::non_binary_target);
}

TEST(Confusion, CountsFormACommutativeMonoid) {
  const auto a = confusion(random_frame(1).pred, random_frame(1).target);
  const auto b = confusion(random_frame(2).pred, random_frame(2).target);
  const auto c = confusion(random_frame(3).pred, random_frame(3).target);
  EXPECT_EQ(a + b, b + a);
  EXPECT_EQ((a + b) + c, a + (b + c));
  EXPECT_EQ(a + ConfusionCounts{}, a);

  // Summed counts equal counting the concatenated frames directly.
  Frame cat = random_frame(1);
  const Frame f2 = random_frame(2);
  cat.pred.insert(cat.pred.end(), f2.pred.begin(), f2.pred.end());
  cat.target.insert(cat.target.end(), f2.target.begin(), f2.target.end());
  EXPECT_EQ(confusion(cat.pred, cat.target), a + b);
  EXPECT_EQ(metrics_from_counts(confusion(cat.pred, cat.target)), metrics_from_counts(a + b));
}

TEST(MetricsFromCounts, Examples) {
  const auto perfect = metrics_from_counts({16, 0, 0, 0});
  for (double v : {perfect.dice, perfect.miou, perfect.recall, perfect.precision, perfect.f2, perfect.accuracy})
    EXPECT_EQ(v, 1.0);

  const auto r = metrics_from_counts({2, 2, 0, 0});
  EXPECT_EQ(r.precision, 0.5);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_NEAR(r.f2, 2.5 / 3.0, 1e-15);

  const auto empty = metrics_from_counts({0, 0, 0, 16});
  EXPECT_EQ(empty.dice, 1.0);
  EXPECT_EQ(empty.miou, 1.0);
  EXPECT_EQ(empty.accuracy, 1.0);
  EXPECT_EQ(empty.recall, 1.0);
  EXPECT_EQ(empty.precision, 1.0);
  EXPECT_EQ(empty.n_frames, 1);
}

TEST(MetricsFromCounts, OneSidedEmptyScoresZero) {
  const auto missed = metrics_from_counts({0, 0, 5, 11});
  EXPECT_EQ(missed.dice, 0.0);
  EXPECT_EQ(missed.recall, 0.0);
  EXPECT_EQ(missed.precision, 0.0);
  EXPECT_EQ(missed.f2, 0.0);
  const auto phantom = metrics_from_counts({0, 5, 0, 11});
  EXPECT_EQ(phantom.dice, 0.0);
  EXPECT_EQ(phantom.recall, 0.0);
  EXPECT_EQ(phantom.precision, 0.0);
}

TEST(MetricsFromCounts, DiceIouIdentityPerFrame) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Frame f = random_frame(s + 1000);
    const auto c = confusion(f.pred, f.target);
    const auto r = metrics_from_counts(c);
    // iou = dice / (2 - dice) is tp/(tp+fp+fn) = 2tp/(2tp+fp+fn) / (2 - 2tp/(2tp+fp+fn)).
    EXPECT_DOUBLE_EQ(r.miou, r.dice / (2.0 - r.dice));
  }
}

TEST(Aggregate, MeansAndErrors) {
  MetricsReport a = metrics_from_counts({3, 1, 2, 10});
  EXPECT_EQ(aggregate_metrics(std::vector{a}), a);

  MetricsReport x, y;
  x.dice = 0.8;
  y.dice = 0.6;
  x.n_frames = y.n_frames = 1;
  EXPECT_DOUBLE_EQ(aggregate_metrics(std::vector{x, y}).dice, 0.7);
  EXPECT_EQ(aggregate_metrics(std::vector{x, y}).n_frames, 2);
  EXPECT_FALSE(aggregate_metrics(std::vector{x, y}).fps);

  x.fps = 10.0;
  EXPECT_EQ(*aggregate_metrics(std::vector{x, y}).fps, 10.0);

  EXPECT_EQ(error_code_of([] { aggregate_metrics(std::vector<MetricsReport>{}); }), ErrorCode::empty_list);
}

TEST(Aggregate, HundredFramesMatchSumOverCount) {
  std::vector<MetricsReport> frames;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Frame f = random_frame(s + 7);
    frames.push_back(metrics_from_counts(confusion(f.pred, f.target)));
  }
  const auto agg = aggregate_metrics(frames);
  double dice = 0, miou = 0, rec = 0, prec = 0, f2 = 0, acc = 0;
  for (const auto& r : frames) {
    dice += r.dice;
    miou += r.miou;
    rec += r.recall;
    prec += r.precision;
    f2 += r.f2;
    acc += r.accuracy;
  }
  EXPECT_NEAR(agg.dice, dice / 100, 1e-12);
  EXPECT_NEAR(agg.miou, miou / 100, 1e-12);
  EXPECT_NEAR(agg.recall, rec / 100, 1e-12);
  EXPECT_NEAR(agg.precision, prec / 100, 1e-12);
  EXPECT_NEAR(agg.f2, f2 / 100, 1e-12);
  EXPECT_NEAR(agg.accuracy, acc / 100, 1e-12);
  EXPECT_EQ(agg.n_frames, 100);
}

TEST(DiceLoss, PerfectPredictionIsZero) {
  const auto g = (torch::rand({3, 1, 8, 8}) > 0.5).to(torch::kFloat32);
  EXPECT_EQ(dice_loss(g, g).item<double>(), 0.0);
  EXPECT_EQ(dice_loss(g, g, {1.0, DiceAggregation::global}).item<double>(), 0.0);
}

TEST(DiceLoss, AllWrongClosedForm) {
  const auto p = torch::zeros({1, 1, 4, 4}, torch::kFloat64);
  const auto g = torch::ones({1, 1, 4, 4}, torch::kFloat64);
  EXPECT_NEAR(dice_loss(p, g).item<double>(), 1.0 - 1.0 / 17.0, 1e-15);
}

TEST(DiceLoss, PerSampleMeanVersusGlobal) {
  auto p = torch::rand({4, 1, 6, 6}, torch::kFloat64);
  auto g = (torch::rand({4, 1, 6, 6}) > 0.6).to(torch::kFloat64);
  double mean = 0;
  for (int i = 0; i < 4; ++i) {
    const double inter = (p[i] * g[i]).sum().item<double>();
    mean += (2 * inter + 1) / (p[i].sum().item<double>() + g[i].sum().item<double>() + 1);
  }
  EXPECT_NEAR(dice_loss(p, g).item<double>(), 1 - mean / 4, 1e-14);
  const double global = (2 * (p * g).sum().item<double>() + 1) / (p.sum().item<double>() + g.sum().item<double>() + 1);
  EXPECT_NEAR(dice_loss(p, g, {1.0, DiceAggregation::global}).item<double>(), 1 - global, 1e-14);
}

TEST(DiceLoss, BoundsOnRandomInputs) {
  for (int i = 0; i < 50; ++i) {
    const auto p = torch::rand({2, 1, 5, 5}, torch::kFloat64);
    const auto g = (torch::rand({2, 1, 5, 5}) > 0.5).to(torch::kFloat64);
    const double l = dice_loss(p, g).item<double>();
    EXPECT_GE(l, 0.0);
    EXPECT_LT(l, 1.0);
  }
}

TEST(DiceLoss, FlippingACorrectPixelNeverHelps) {
  auto g = (torch::rand({1, 1, 8, 8}) > 0.5).to(torch::kFloat64);
  auto p = g.clone();
  const double base = dice_loss(p, g).item<double>();
  auto flat = p.view({-1});
  for (std::int64_t i = 0; i < flat.numel(); ++i) {
    auto q = p.clone();
    q.view({-1})[i] = 1.0 - q.view({-1})[i].item<double>();
    EXPECT_GE(dice_loss(q, g).item<double>(), base);
  }
}

TEST(DiceLoss, GradientMatchesCentralDifferences) {
  torch::manual_seed(3);
  const auto p = (torch::rand({2, 1, 4, 4}, torch::kFloat64) * 0.9 + 0.05).requires_grad_(true);
  const auto g = (torch::rand({2, 1, 4, 4}) > 0.5).to(torch::kFloat64);
  for (auto agg : {DiceAggregation::per_sample_mean, DiceAggregation::global}) {
    const DiceLossConfig cfg{1.0, agg};
    const auto grad = torch::autograd::grad({dice_loss(p, g, cfg)}, {p})[0];
    const double h = 1e-6;
    auto base = p.detach().clone();
    for (std::int64_t i = 0; i < base.numel(); ++i) {
      auto up = base.clone(), down = base.clone();
      up.view({-1})[i] += h;
      down.view({-1})[i] -= h;
      const double fd = (dice_loss(up, g, cfg).item<double>() - dice_loss(down, g, cfg).item<double>()) / (2 * h);
      const double an = grad.view({-1})[i].item<double>();
      EXPECT_LT(std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}), 1e-4) << i;
    }
  }
}

TEST(DiceLoss, Errors) {
  EXPECT_EQ(error_code_of([] { dice_loss(torch::rand({1, 1, 4, 4}), torch::ones({1, 1, 4, 5})); }),
            ErrorCode::shape_mismatch);
  EXPECT_EQ(error_code_of([] { dice_loss(torch::rand({1, 1, 2, 2}), torch::full({1, 1, 2, 2}, 0.5)); }),
            ErrorCode::non_binary_target);
  EXPECT_EQ(error_code_of([] { dice_loss(torch::rand({1, 1, 2, 2}), torch::ones({1, 1, 2, 2}), {0.0}); }),
            ErrorCode::invalid_config);
}

TEST(Report, JsonRoundTripIsExact) {
  lt::TempDir dir("report");
  MetricsReport r = metrics_from_counts({7, 3, 5, 101});
  r.n_frames = 3;
  write_report_json(r, dir / "r.json");
  EXPECT_EQ(read_report_json(dir / "r.json"), r);
  const nlohmann::json j = r;
  EXPECT_TRUE(j.at("fps").is_null());
  r.fps = 12.345678901234;
  write_report_json(r, dir / "r2.json");
  EXPECT_EQ(read_report_json(dir / "r2.json"), r);
}

TEST(Report, CsvColumnOrderAndRoundTrip) {
  lt::TempDir dir("table");
  MetricsReport a = metrics_from_counts({7, 3, 5, 101});
  a.fps = 55.5;
  MetricsReport b = metrics_from_counts({1, 0, 9, 50});
  append_table_csv({{"model, a", a}}, dir / "t.csv");
  append_table_csv({{"b", b}}, dir / "t.csv");
  std::ifstream in(dir / "t.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "method,dice,miou,recall,precision,f2,accuracy,fps");
  const auto rows = read_table_csv(dir / "t.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].method, "model, a");
  b.n_frames = 0;
  a.n_frames = 0;
  auto ra = rows[0].report, rb = rows[1].report;
  EXPECT_EQ(ra, a);
  EXPECT_EQ(rb, b);
}

TEST(Report, MarkdownBoldsBestPerColumn) {
  MetricsReport good = metrics_from_counts({10, 0, 0, 10});
  good.fps = 5.0;
  MetricsReport fast = metrics_from_counts({5, 5, 5, 5});
  fast.fps = 50.0;
  std::ostringstream md;
  write_table_markdown({{"good", good}, {"fast", fast}}, md);
  const std::string s = md.str();
  EXPECT_NE(s.find("| method | dice | miou | recall | precision | f2 | accuracy | fps |"), std::string::npos);
  EXPECT_NE(s.find("| good | **1.0000** |"), std::string::npos);
  EXPECT_NE(s.find("**50.00**"), std::string::npos);
  EXPECT_EQ(s.find("**5.00**"), std::string::npos);
}

TEST(Bench, ProtocolValidation) {
  BenchProtocol p;
  p.timed_iters = 5;
  EXPECT_EQ(error_code_of([&] { p.validate(); }), ErrorCode::invalid_config);
  p.timed_iters = 10;
  EXPECT_NO_THROW(p.validate());
  p.batch_size = 0;
  EXPECT_EQ(error_code_of([&] { p.validate(); }), ErrorCode::invalid_config);
}

TEST(Bench, ReportsPositiveFiniteStatistics) {
  auto stub = lt::oracle_segmenter({64, 64});
  BenchProtocol p;
  p.input_size = {64, 64};
  p.warmup_iters = 2;
  p.timed_iters = 20;
  const auto r = fps_benchmark(stub, p);
  EXPECT_TRUE(std::isfinite(r.fps));
  EXPECT_GT(r.fps, 0.0);
  EXPECT_EQ(r.iteration_ms.size(), 20u);
  EXPECT_LE(r.min_ms, r.median_ms);
  EXPECT_LE(r.median_ms, r.max_ms);
  EXPECT_DOUBLE_EQ(r.fps, 1000.0 / r.median_ms);
  p.statistic = BenchStatistic::mean;
  const auto m = fps_benchmark(stub, p);
  EXPECT_DOUBLE_EQ(m.fps, 1000.0 / m.mean_ms);
}
