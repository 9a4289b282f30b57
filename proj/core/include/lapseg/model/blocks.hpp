#pragma once

#include <map>
#include <vector>

#include <torch/torch.h>

#include "lapseg/model/config.hpp"

namespace lapseg::model {

/// Multi-scale feature maps keyed by stride, NCHW.
struct FeaturePyramid {
  std::map<int, torch::Tensor> levels;

  std::vector<int> strides() const;
  std::int64_t channels(int stride) const;
};

/// Per-level channel concatenation [a | b]. Levels of `b` whose spatial size
/// differs from `a` (odd-size rounding) are bilinearly resampled onto a's grid.
FeaturePyramid fuse_skips(const FeaturePyramid& a, const FeaturePyramid& b);

/// (conv3x3 -> BN -> ReLU) x2 plus shortcut, ReLU after the addition. The
/// shortcut is a 1x1 conv + BN when the channel count changes.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  torch::nn::Conv2d proj{nullptr};
  torch::nn::BatchNorm2d proj_bn{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Parallel dilated 3x3 convolutions (plus an optional image-pooling branch),
/// concatenated and projected by a 1x1 convolution.
class AsppImpl : public torch::nn::Module {
 public:
  AsppImpl(int in_channels, const std::vector<int>& rates, int out_channels, bool pooling = true);
  torch::Tensor forward(const torch::Tensor& x);

  std::vector<torch::nn::Conv2d> branches;
  torch::nn::Conv2d pool_conv{nullptr};
  torch::nn::Conv2d project{nullptr};
};
TORCH_MODULE(Aspp);

/// x * sigmoid(W2 relu(W1 avgpool(x))), one gate per channel.
class SqueezeExciteImpl : public torch::nn::Module {
 public:
  SqueezeExciteImpl(int channels, int reduction);
  torch::Tensor forward(const torch::Tensor& x);
  /// B x C gate values in (0, 1).
  torch::Tensor gate(const torch::Tensor& x);

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(SqueezeExcite);

/// transposed conv (x2) -> concat skip -> residual x2 -> BN -> ReLU -> ASPP
/// -> BN -> ReLU -> SE.
class DecoderBlockImpl : public torch::nn::Module {
 public:
  /// `skip_channels` 0 builds a skip-free block.
  DecoderBlockImpl(int in_channels, int skip_channels, int out_channels, const DecoderBlockSpec& spec);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& skip = {});

  int skip_channels() const { return skip_channels_; }
  int out_channels() const { return out_channels_; }

  torch::nn::ConvTranspose2d up{nullptr};
  std::vector<ResidualBlock> residuals;
  torch::nn::BatchNorm2d bn1{nullptr};
  Aspp aspp{nullptr};
  torch::nn::BatchNorm2d bn2{nullptr};
  SqueezeExcite se{nullptr};

 private:
  int skip_channels_;
  int out_channels_;
};
TORCH_MODULE(DecoderBlock);

}  // namespace lapseg::model
