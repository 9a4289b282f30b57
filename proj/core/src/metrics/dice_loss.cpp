#include "lapseg/metrics/dice_loss.hpp"

#include "lapseg/error.hpp"

namespace lapseg::metrics {

std::string_view to_string(DiceAggregation a) {
  return a == DiceAggregation::global ? "global" : "per_sample_mean";
}

DiceAggregation parse_dice_aggregation(std::string_view text) {
  if (text == "per_sample_mean") return DiceAggregation::per_sample_mean;
  if (text == "global") return DiceAggregation::global;
  throw Error(ErrorCode::invalid_config, "unknown dice aggregation '" + std::string(text) + "'");
}

void DiceLossConfig::validate() const {
  if (!(smooth > 0.0)) throw Error(ErrorCode::invalid_config, "dice smooth term must be positive");
}

torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& target, const DiceLossConfig& config) {
  config.validate();
  if (probs.sizes() != target.sizes())
    throw Error(ErrorCode::shape_mismatch, "probs " + c10::str(probs.sizes()) + " vs target " +
                                               c10::str(target.sizes()));
  if (probs.dim() < 1 || probs.size(0) == 0) throw Error(ErrorCode::shape_mismatch, "empty batch");
  if (((target != 0) & (target != 1)).any().item<bool>())
    throw Error(ErrorCode::non_binary_target, "target values must be 0 or 1");

  const auto g = target.to(probs.scalar_type());
  const double s = config.smooth;
  if (config.aggregation == DiceAggregation::global) {
    const auto inter = (probs * g).sum();
    return 1.0 - (2.0 * inter + s) / (probs.sum() + g.sum() + s);
  }
  const auto p = probs.reshape({probs.size(0), -1});
  const auto gf = g.reshape({probs.size(0), -1});
  const auto per_sample = (2.0 * (p * gf).sum(1) + s) / (p.sum(1) + gf.sum(1) + s);
  return 1.0 - per_sample.mean();
}

}  // namespace lapseg::metrics
