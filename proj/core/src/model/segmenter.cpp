#include "lapseg/model/segmenter.hpp"

#include "lapseg/error.hpp"

namespace lapseg::model {

NetworkSegmenter::NetworkSegmenter(SegmentationNet net, std::string name)
    : net_(std::move(net)), name_(std::move(name)) {
  net_->eval();
}

torch::Tensor NetworkSegmenter::predict(const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  if (net_->is_training()) net_->eval();
  const auto& w = net_->head->weight;
  return net_->forward(images.to(w.device(), w.scalar_type())).to(images.device());
}

ColorKeySegmenter::ColorKeySegmenter(std::array<float, 3> key_rgb, float tolerance, Size2 input_size)
    : key_(key_rgb), tolerance_(tolerance), input_size_(input_size) {
  if (!(tolerance >= 0.0f)) throw Error(ErrorCode::invalid_config, "tolerance must be non-negative");
}

torch::Tensor ColorKeySegmenter::predict(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != 3)
    throw Error(ErrorCode::shape_error, "expected a B x 3 x H x W batch");
  const auto key = torch::tensor({key_[0], key_[1], key_[2]}, images.options()).view({1, 3, 1, 1});
  const auto distance = (images - key).abs().amax(1, /*keepdim=*/true);
  return (distance <= tolerance_).to(images.scalar_type());
}

}  // namespace lapseg::model
