#include "lapseg/metrics/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <ATen/CPUGeneratorImpl.h>

#include "lapseg/error.hpp"

namespace lapseg::metrics {

std::string_view to_string(BenchStatistic s) { return s == BenchStatistic::mean ? "mean" : "median"; }

BenchStatistic parse_bench_statistic(std::string_view text) {
  if (text == "median") return BenchStatistic::median;
  if (text == "mean") return BenchStatistic::mean;
  throw Error(ErrorCode::invalid_config, "unknown statistic '" + std::string(text) + "'");
}

void BenchProtocol::validate() const {
  if (batch_size < 1) throw Error(ErrorCode::invalid_config, "batch_size must be >= 1");
  if (warmup_iters < 0) throw Error(ErrorCode::invalid_config, "warmup_iters must be >= 0");
  if (timed_iters < 10) throw Error(ErrorCode::invalid_config, "timed_iters must be >= 10");
  if (input_size.width <= 0 || input_size.height <= 0)
    throw Error(ErrorCode::invalid_config, "input size must be positive");
}

BenchResult fps_benchmark(model::Segmenter& segmenter, const BenchProtocol& protocol) {
  protocol.validate();
  auto gen = at::detail::createCPUGenerator(protocol.seed);
  const torch::Tensor batch =
      torch::rand({protocol.batch_size, 3, protocol.input_size.height, protocol.input_size.width}, gen);

  for (int i = 0; i < protocol.warmup_iters; ++i) (void)segmenter.predict(batch);

  using clock = std::chrono::steady_clock;
  BenchResult r;
  r.iteration_ms.reserve(protocol.timed_iters);
  for (int i = 0; i < protocol.timed_iters; ++i) {
    const auto t0 = clock::now();
    torch::Tensor out = segmenter.predict(batch);
    // CPU kernels are synchronous; touching the result is the barrier.
    (void)out.data_ptr();
    const auto t1 = clock::now();
    r.iteration_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  std::vector<double> sorted = r.iteration_ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.median_ms = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  r.mean_ms = std::accumulate(sorted.begin(), sorted.end(), 0.0) / double(n);
  double var = 0.0;
  for (double t : sorted) var += (t - r.mean_ms) * (t - r.mean_ms);
  r.stddev_ms = std::sqrt(var / double(n));
  r.min_ms = sorted.front();
  r.max_ms = sorted.back();
  const double stat_ms = protocol.statistic == BenchStatistic::median ? r.median_ms : r.mean_ms;
  r.fps = double(protocol.batch_size) / (stat_ms / 1000.0);
  return r;
}

}  // namespace lapseg::metrics
