#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "lapseg/model/segmenter.hpp"
#include "lapseg/types.hpp"

namespace lapseg::metrics {

enum class BenchStatistic { median, mean };

std::string_view to_string(BenchStatistic s);
BenchStatistic parse_bench_statistic(std::string_view text);

struct BenchProtocol {
  int batch_size = 1;
  int warmup_iters = 10;
  int timed_iters = 100;
  Size2 input_size = kDefaultTargetSize;
  BenchStatistic statistic = BenchStatistic::median;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BenchResult {
  double fps = 0.0;
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::vector<double> iteration_ms;
};

/// Warm-up forwards, then `timed_iters` individually timed forwards on one
/// fixed random batch. fps = batch_size / statistic(per-iteration seconds).
/// Run one benchmark at a time per device.
BenchResult fps_benchmark(model::Segmenter& segmenter, const BenchProtocol& protocol);

}  // namespace lapseg::metrics
