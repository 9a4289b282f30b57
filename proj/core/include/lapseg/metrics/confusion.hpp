#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lapseg::metrics {

/// Pixel tallies for one or more frames. Component-wise addition is
/// associative and commutative.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  bool operator==(const ConfusionCounts&) const = default;
};

inline constexpr double kDefaultThreshold = 0.5;

/// pred is binarised at `pred >= threshold`; target must hold 0/1.
ConfusionCounts confusion(std::span<const float> pred, std::span<const std::uint8_t> target,
                          double threshold = kDefaultThreshold);
ConfusionCounts confusion(std::span<const double> pred, std::span<const std::uint8_t> target,
                          double threshold = kDefaultThreshold);

struct MetricsReport {
  double dice = 0.0;
  double miou = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f2 = 0.0;
  double accuracy = 0.0;
  std::optional<double> fps;
  std::int64_t n_frames = 0;

  bool operator==(const MetricsReport&) const = default;
};

/// Score given to a ratio when prediction and target are both empty.
inline constexpr double kBothEmptyScore = 1.0;

/// Per-frame report (n_frames = 1). Ratios whose denominator is zero score
/// `both_empty_score` when prediction and target are both empty and 0 when
/// only one side is.
MetricsReport metrics_from_counts(const ConfusionCounts& counts, double both_empty_score = kBothEmptyScore);

/// Unweighted per-frame mean. fps is the mean of the frames that carry one.
MetricsReport aggregate_metrics(std::span<const MetricsReport> per_frame);

}  // namespace lapseg::metrics
