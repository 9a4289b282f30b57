#include "lapseg/model/network.hpp"

#include <limits>

#include "lapseg/error.hpp"

namespace lapseg::model {

namespace {

FeaturePyramid keep_strides(FeaturePyramid pyr, const std::vector<int>& strides) {
  FeaturePyramid out;
  for (int s : strides) {
    auto it = pyr.levels.find(s);
    if (it == pyr.levels.end())
      throw Error(ErrorCode::incompatible_strides, "backbone has no stride-" + std::to_string(s) + " level");
    out.levels.emplace(s, std::move(it->second));
  }
  return out;
}

}  // namespace

SegmentationNetImpl::SegmentationNetImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  encoder_a = register_module("encoder_a", make_backbone(config_.encoder_a, config_.width_multiplier));
  encoder_b = register_module("encoder_b", make_backbone(config_.encoder_b, config_.width_multiplier));
  const auto ch_a = encoder_a->channels();
  const auto ch_b = encoder_b->channels();
  for (int s : config_.encoder_a.output_strides)
    if (!ch_a.contains(s) || !ch_b.contains(s))
      throw Error(ErrorCode::incompatible_strides, "no stride-" + std::to_string(s) + " level in a backbone");

  const int bottleneck = bottleneck_stride(config_);
  const auto skips = skip_strides(config_);
  int in = ch_a.at(bottleneck) + ch_b.at(bottleneck);
  int stride = bottleneck;
  for (std::size_t i = 0; i < config_.decoder_blocks.size(); ++i) {
    const auto& spec = config_.decoder_blocks[i];
    stride /= 2;
    const bool has_skip = std::find(skips.begin(), skips.end(), stride) != skips.end();
    const int skip = has_skip ? ch_a.at(stride) + ch_b.at(stride) : 0;
    const int out = effective_channels(spec, config_.width_multiplier);
    decoder.push_back(register_module("decoder" + std::to_string(i), DecoderBlock(in, skip, out, spec)));
    in = out;
  }
  head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, 1).bias(true)));
}

void SegmentationNetImpl::check_input(const torch::Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3)
    throw Error(ErrorCode::shape_error, "expected a B x 3 x H x W batch");
  if (images.size(0) < 1 || images.size(2) < 32 || images.size(3) < 32 || images.size(2) % 32 ||
      images.size(3) % 32)
    throw Error(ErrorCode::shape_error, "spatial size " + std::to_string(images.size(3)) + "x" +
                                            std::to_string(images.size(2)) + " is not a multiple of 32");
}

std::pair<FeaturePyramid, FeaturePyramid> SegmentationNetImpl::encode(const torch::Tensor& images) {
  check_input(images);
  return {keep_strides(encoder_a->forward(images), config_.encoder_a.output_strides),
          keep_strides(encoder_b->forward(images), config_.encoder_b.output_strides)};
}

torch::Tensor SegmentationNetImpl::forward_logits(const torch::Tensor& images,
                                                  std::vector<std::vector<std::int64_t>>* decoder_shapes) {
  auto [pa, pb] = encode(images);
  const FeaturePyramid fused = fuse_skips(pa, pb);
  int stride = bottleneck_stride(config_);
  torch::Tensor x = fused.levels.at(stride);
  for (auto& block : decoder) {
    stride /= 2;
    auto it = fused.levels.find(stride);
    x = block(x, it == fused.levels.end() ? torch::Tensor() : it->second);
    if (decoder_shapes) decoder_shapes->push_back(x.sizes().vec());
  }
  return head(x);
}

torch::Tensor SegmentationNetImpl::forward(const torch::Tensor& images) {
  torch::Tensor logits = forward_logits(images);
  if (!torch::isfinite(logits).all().item<bool>())
    throw Error(ErrorCode::non_finite_activation, "NaN/Inf in output logits");
  // Saturated sigmoids round to exactly 0 or 1; keep probabilities in the
  // open interval at the working precision.
  const double eps = logits.scalar_type() == torch::kDouble ? std::numeric_limits<double>::epsilon()
                                                            : std::numeric_limits<float>::epsilon();
  return torch::sigmoid(logits).clamp(eps, 1.0 - eps);
}

std::int64_t SegmentationNetImpl::trainable_parameter_count() const { return count_parameters(*this); }

SegmentationModel build_model(const ModelConfig& config) { return SegmentationNet(config); }

std::int64_t count_parameters(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters())
    if (p.requires_grad()) n += p.numel();
  return n;
}

void zero_head(SegmentationNetImpl& net) {
  torch::NoGradGuard no_grad;
  net.head->weight.zero_();
  net.head->bias.zero_();
}

}  // namespace lapseg::model
