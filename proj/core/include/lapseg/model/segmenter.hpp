#pragma once

#include <array>
#include <string>

#include <torch/torch.h>

#include "lapseg/model/network.hpp"
#include "lapseg/types.hpp"

namespace lapseg::model {

/// Anything that maps a B x 3 x H x W image batch in [0,1] to a
/// B x 1 x H x W probability map. Used by evaluation, benchmarking and the CLI.
class Segmenter {
 public:
  virtual ~Segmenter() = default;

  /// Inference mode; must not modify the model.
  virtual torch::Tensor predict(const torch::Tensor& images) = 0;
  /// Resolution the model expects; inputs are resized to this.
  virtual Size2 input_size() const = 0;
  virtual std::string name() const = 0;
};

class NetworkSegmenter final : public Segmenter {
 public:
  explicit NetworkSegmenter(SegmentationNet net, std::string name = "NasmobResNet");

  torch::Tensor predict(const torch::Tensor& images) override;
  Size2 input_size() const override { return net_->config().input_size; }
  std::string name() const override { return name_; }

  SegmentationNet& net() { return net_; }

 private:
  SegmentationNet net_;
  std::string name_;
};

/// Marks pixels within `tolerance` (max-abs, per channel) of a key colour.
/// A scripted stand-in for a model: on frames whose instruments are painted in
/// the key colour it reproduces the ground truth exactly.
class ColorKeySegmenter final : public Segmenter {
 public:
  ColorKeySegmenter(std::array<float, 3> key_rgb, float tolerance, Size2 input_size);

  torch::Tensor predict(const torch::Tensor& images) override;
  Size2 input_size() const override { return input_size_; }
  std::string name() const override { return "color_key"; }

  const std::array<float, 3>& key() const { return key_; }
  float tolerance() const { return tolerance_; }

 private:
  std::array<float, 3> key_;
  float tolerance_;
  Size2 input_size_;
};

}  // namespace lapseg::model
