#pragma once

#include <string_view>

#include <torch/torch.h>

namespace lapseg::metrics {

enum class DiceAggregation { per_sample_mean, global };

std::string_view to_string(DiceAggregation a);
DiceAggregation parse_dice_aggregation(std::string_view text);

struct DiceLossConfig {
  double smooth = 1.0;
  DiceAggregation aggregation = DiceAggregation::per_sample_mean;

  void validate() const;
};

/// Soft dice loss. Per sample i: d_i = (2 sum p g + s) / (sum p + sum g + s);
/// loss = 1 - mean_i d_i (or the same ratio over the whole batch for
/// `global`). `probs` and `target` share a shape whose first dimension is the
/// batch; `target` must be 0/1. Differentiable in `probs`.
torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& target,
                        const DiceLossConfig& config = {});

}  // namespace lapseg::metrics
