#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <torch/torch.h>

#include "lapseg/model/blocks.hpp"
#include "lapseg/model/config.hpp"

namespace lapseg::model {

/// Feature extractor emitting maps at strides 4, 8, 16 and 32.
class Backbone : public torch::nn::Module {
 public:
  /// All four levels; callers drop the ones they do not use.
  virtual FeaturePyramid forward(const torch::Tensor& x) = 0;
  /// Channel count per stride.
  virtual std::map<int, int> channels() const = 0;
  virtual std::string name() const = 0;
};

/// Four strided residual stages on a stride-2 stem; trained from scratch.
class TinyReferenceBackbone : public Backbone {
 public:
  explicit TinyReferenceBackbone(double width_multiplier);
  FeaturePyramid forward(const torch::Tensor& x) override;
  std::map<int, int> channels() const override;
  std::string name() const override { return "tiny_reference"; }

 private:
  torch::nn::Sequential stem_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
  std::map<int, int> channels_;
};

/// Bottleneck-residual extractor with the ResNet50 layout (3, 4, 6, 3 blocks;
/// 256/512/1024/2048 channels at strides 4..32 at width 1).
class BottleneckResNetBackbone : public Backbone {
 public:
  explicit BottleneckResNetBackbone(double width_multiplier);
  FeaturePyramid forward(const torch::Tensor& x) override;
  std::map<int, int> channels() const override;
  std::string name() const override { return "backbone_b"; }

 private:
  torch::nn::Sequential stem_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
  std::map<int, int> channels_;
};

/// Depthwise-separable cell extractor sized like NASNet-Mobile
/// (44/264/528/1056 channels at strides 4..32 at width 1).
class SeparableCellBackbone : public Backbone {
 public:
  explicit SeparableCellBackbone(double width_multiplier);
  FeaturePyramid forward(const torch::Tensor& x) override;
  std::map<int, int> channels() const override;
  std::string name() const override { return "backbone_a"; }

 private:
  torch::nn::Sequential stem_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
  std::map<int, int> channels_;
};

/// Builds the extractor for `spec`. Pretrained weights are read from
/// `$LAPSEG_WEIGHTS_DIR/<backbone_id>.pt`; WeightsUnavailable when absent.
std::shared_ptr<Backbone> make_backbone(const EncoderSpec& spec, double width_multiplier);

std::filesystem::path pretrained_weights_path(BackboneId id);

}  // namespace lapseg::model
