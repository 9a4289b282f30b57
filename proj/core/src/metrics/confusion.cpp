#include "lapseg/metrics/confusion.hpp"

#include <algorithm>

#include "lapseg/error.hpp"

namespace lapseg::metrics {

namespace {

template <typename T>
ConfusionCounts tally(std::span<const T> pred, std::span<const std::uint8_t> target, double threshold) {
  if (pred.size() != target.size())
    throw Error(ErrorCode::shape_mismatch, "prediction has " + std::to_string(pred.size()) +
                                               " pixels, target " + std::to_string(target.size()));
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = double(pred[i]) >= threshold;
    const std::uint8_t g = target[i];
    if (g > 1) throw Error(ErrorCode::non_binary_target, "target value " + std::to_string(g));
    if (p) {
      g ? ++c.tp : ++c.fp;
    } else {
      g ? ++c.fn : ++c.tn;
    }
  }
  return c;
}

}  // namespace

ConfusionCounts confusion(std::span<const float> pred, std::span<const std::uint8_t> target, double threshold) {
  return tally(pred, target, threshold);
}

ConfusionCounts confusion(std::span<const double> pred, std::span<const std::uint8_t> target, double threshold) {
  return tally(pred, target, threshold);
}

MetricsReport metrics_from_counts(const ConfusionCounts& c, double both_empty_score) {
  const double tp = double(c.tp), fp = double(c.fp), fn = double(c.fn), tn = double(c.tn);
  const bool both_empty = c.tp + c.fp + c.fn == 0;
  auto ratio = [&](double num, double den) { return den > 0.0 ? num / den : (both_empty ? both_empty_score : 0.0); };

  MetricsReport r;
  r.dice = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  r.miou = ratio(tp, tp + fp + fn);
  r.recall = ratio(tp, tp + fn);
  r.precision = ratio(tp, tp + fp);
  const double f2_den = 4.0 * r.precision + r.recall;
  r.f2 = both_empty ? both_empty_score : (f2_den > 0.0 ? 5.0 * r.precision * r.recall / f2_den : 0.0);
  r.accuracy = c.total() > 0 ? (tp + tn) / double(c.total()) : both_empty_score;
  r.n_frames = 1;
  return r;
}

MetricsReport aggregate_metrics(std::span<const MetricsReport> per_frame) {
  if (per_frame.empty()) throw Error(ErrorCode::empty_list, "no frames to aggregate");
  MetricsReport out;
  double fps_sum = 0.0;
  std::size_t fps_count = 0;
  for (const auto& r : per_frame) {
    out.dice += r.dice;
    out.miou += r.miou;
    out.recall += r.recall;
    out.precision += r.precision;
    out.f2 += r.f2;
    out.accuracy += r.accuracy;
    out.n_frames += std::max<std::int64_t>(1, r.n_frames);
    if (r.fps) {
      fps_sum += *r.fps;
      ++fps_count;
    }
  }
  const double n = double(per_frame.size());
  out.dice /= n;
  out.miou /= n;
  out.recall /= n;
  out.precision /= n;
  out.f2 /= n;
  out.accuracy /= n;
  if (fps_count) out.fps = fps_sum / double(fps_count);
  return out;
}

}  // namespace lapseg::metrics
