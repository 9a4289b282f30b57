#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "lapseg/model/backbones.hpp"
#include "lapseg/model/blocks.hpp"
#include "lapseg/model/config.hpp"

namespace lapseg::model {

/// Two backbones over the same input, fused skips, a ladder of decoder blocks
/// from the bottleneck back to full resolution, and a 1x1 conv + sigmoid head.
/// Tensors are NCHW; the output is B x 1 x H x W.
class SegmentationNetImpl : public torch::nn::Module {
 public:
  explicit SegmentationNetImpl(const ModelConfig& config);

  std::pair<FeaturePyramid, FeaturePyramid> encode(const torch::Tensor& images);
  torch::Tensor forward_logits(const torch::Tensor& images,
                               std::vector<std::vector<std::int64_t>>* decoder_shapes = nullptr);
  /// Probabilities in (0, 1). Throws NonFiniteActivation on NaN/Inf logits.
  torch::Tensor forward(const torch::Tensor& images);

  const ModelConfig& config() const { return config_; }
  std::int64_t trainable_parameter_count() const;

  std::shared_ptr<Backbone> encoder_a;
  std::shared_ptr<Backbone> encoder_b;
  std::vector<DecoderBlock> decoder;
  torch::nn::Conv2d head{nullptr};

 private:
  void check_input(const torch::Tensor& images) const;

  ModelConfig config_;
};
TORCH_MODULE(SegmentationNet);

using SegmentationModel = SegmentationNet;

SegmentationModel build_model(const ModelConfig& config);

/// Sum of element counts over parameters that require gradients.
std::int64_t count_parameters(const torch::nn::Module& module);

/// Zeroes the 1x1 output head so every probability is exactly 0.5.
void zero_head(SegmentationNetImpl& net);

}  // namespace lapseg::model
