#include "lapseg/model/blocks.hpp"

#include <string>

#include "lapseg/error.hpp"

namespace F = torch::nn::functional;
namespace nn = torch::nn;

namespace lapseg::model {

namespace {

std::string dims(const torch::Tensor& t) {
  return std::to_string(t.size(2)) + "x" + std::to_string(t.size(3));
}

nn::Conv2d conv(int in, int out, int k, int stride = 1, int padding = 0, int dilation = 1,
                bool bias = false) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(padding).dilation(dilation).bias(bias));
}

}  // namespace

std::vector<int> FeaturePyramid::strides() const {
  std::vector<int> s;
  for (const auto& [stride, _] : levels) s.push_back(stride);
  return s;
}

std::int64_t FeaturePyramid::channels(int stride) const { return levels.at(stride).size(1); }

FeaturePyramid fuse_skips(const FeaturePyramid& a, const FeaturePyramid& b) {
  if (a.strides() != b.strides()) throw Error(ErrorCode::stride_set_mismatch, "pyramids expose different strides");
  FeaturePyramid fused;
  for (const auto& [stride, fa] : a.levels) {
    torch::Tensor fb = b.levels.at(stride);
    if (fb.size(2) != fa.size(2) || fb.size(3) != fa.size(3)) {
      fb = F::interpolate(fb, F::InterpolateFuncOptions()
                                  .size(std::vector<std::int64_t>{fa.size(2), fa.size(3)})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
    }
    fused.levels.emplace(stride, torch::cat({fa, fb}, 1));
  }
  return fused;
}

ResidualBlockImpl::ResidualBlockImpl(int in_channels, int out_channels) {
  conv1 = register_module("conv1", conv(in_channels, out_channels, 3, 1, 1));
  bn1 = register_module("bn1", nn::BatchNorm2d(out_channels));
  conv2 = register_module("conv2", conv(out_channels, out_channels, 3, 1, 1));
  bn2 = register_module("bn2", nn::BatchNorm2d(out_channels));
  if (in_channels != out_channels) {
    proj = register_module("proj", conv(in_channels, out_channels, 1));
    proj_bn = register_module("proj_bn", nn::BatchNorm2d(out_channels));
  }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  torch::Tensor y = torch::relu(bn1(conv1(x)));
  y = torch::relu(bn2(conv2(y)));
  torch::Tensor shortcut = proj ? proj_bn(proj(x)) : x;
  return torch::relu(y + shortcut);
}

AsppImpl::AsppImpl(int in_channels, const std::vector<int>& rates, int out_channels, bool pooling) {
  for (int rate : rates) {
    // padding == dilation keeps the spatial size for a 3x3 kernel.
    branches.push_back(register_module("branch_d" + std::to_string(rate),
                                       conv(in_channels, out_channels, 3, 1, rate, rate, true)));
  }
  if (pooling) pool_conv = register_module("pool_conv", conv(in_channels, out_channels, 1, 1, 0, 1, true));
  const int concat = out_channels * int(branches.size() + (pooling ? 1 : 0));
  project = register_module("project", conv(concat, out_channels, 1, 1, 0, 1, true));
}

torch::Tensor AsppImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> outs;
  outs.reserve(branches.size() + 1);
  for (auto& b : branches) outs.push_back(b(x));
  if (pool_conv) {
    torch::Tensor pooled = torch::relu(pool_conv(F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions(1))));
    outs.push_back(pooled.expand({x.size(0), pooled.size(1), x.size(2), x.size(3)}));
  }
  return project(torch::cat(outs, 1));
}

SqueezeExciteImpl::SqueezeExciteImpl(int channels, int reduction) {
  if (reduction <= 0 || channels % reduction != 0)
    throw Error(ErrorCode::invalid_config, "SE reduction " + std::to_string(reduction) +
                                               " does not divide " + std::to_string(channels));
  fc1 = register_module("fc1", nn::Linear(channels, channels / reduction));
  fc2 = register_module("fc2", nn::Linear(channels / reduction, channels));
}

torch::Tensor SqueezeExciteImpl::gate(const torch::Tensor& x) {
  return torch::sigmoid(fc2(torch::relu(fc1(x.mean({2, 3})))));
}

torch::Tensor SqueezeExciteImpl::forward(const torch::Tensor& x) {
  return x * gate(x).unsqueeze(-1).unsqueeze(-1);
}

DecoderBlockImpl::DecoderBlockImpl(int in_channels, int skip_channels, int out_channels,
                                   const DecoderBlockSpec& spec)
    : skip_channels_(skip_channels), out_channels_(out_channels) {
  // k=4, s=2, p=1: output size is exactly twice the input.
  up = register_module("up", nn::ConvTranspose2d(
                                 nn::ConvTranspose2dOptions(in_channels, out_channels, 4).stride(2).padding(1)));
  int c = out_channels + skip_channels;
  for (int i = 0; i < spec.num_residual_blocks; ++i) {
    residuals.push_back(register_module("res" + std::to_string(i + 1), ResidualBlock(c, out_channels)));
    c = out_channels;
  }
  bn1 = register_module("bn1", nn::BatchNorm2d(out_channels));
  aspp = register_module("aspp", Aspp(out_channels, spec.aspp_dilation_rates, out_channels, spec.aspp_pooling));
  bn2 = register_module("bn2", nn::BatchNorm2d(out_channels));
  se = register_module("se", SqueezeExcite(out_channels, spec.se_reduction));
}

torch::Tensor DecoderBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& skip) {
  if (skip.defined() != (skip_channels_ > 0))
    throw Error(ErrorCode::skip_shape_mismatch,
                skip_channels_ > 0 ? "block expects a skip connection" : "block is skip-free");
  if (skip.defined()) {
    if (skip.size(0) != x.size(0) || skip.size(1) != skip_channels_ || skip.size(2) != 2 * x.size(2) ||
        skip.size(3) != 2 * x.size(3))
      throw Error(ErrorCode::skip_shape_mismatch,
                  "skip " + dims(skip) + "x" + std::to_string(skip.size(1)) + " against input " + dims(x));
  }
  torch::Tensor y = up(x);
  if (skip.defined()) y = torch::cat({y, skip}, 1);
  for (auto& r : residuals) y = r(y);
  y = torch::relu(bn1(y));
  y = torch::relu(bn2(aspp(y)));
  return se(y);
}

}  // namespace lapseg::model
