#include "lapseg/model/backbones.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "lapseg/error.hpp"

namespace nn = torch::nn;

namespace lapseg::model {

namespace {

int scale(int channels, double width_multiplier) {
  return std::max(2, int(std::lround(channels * width_multiplier)));
}

nn::Conv2d conv(int in, int out, int k, int stride = 1, int padding = 0, int groups = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(padding).groups(groups).bias(false));
}

// conv3x3(stride) -> BN -> ReLU -> conv3x3 -> BN, projected shortcut, ReLU.
class DownBlockImpl : public nn::Module {
 public:
  DownBlockImpl(int in, int out) {
    conv1 = register_module("conv1", conv(in, out, 3, 2, 1));
    bn1 = register_module("bn1", nn::BatchNorm2d(out));
    conv2 = register_module("conv2", conv(out, out, 3, 1, 1));
    bn2 = register_module("bn2", nn::BatchNorm2d(out));
    proj = register_module("proj", conv(in, out, 1, 2));
    proj_bn = register_module("proj_bn", nn::BatchNorm2d(out));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    torch::Tensor y = bn2(conv2(torch::relu(bn1(conv1(x)))));
    return torch::relu(y + proj_bn(proj(x)));
  }

  nn::Conv2d conv1{nullptr}, conv2{nullptr}, proj{nullptr};
  nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, proj_bn{nullptr};
};
TORCH_MODULE(DownBlock);

class BottleneckImpl : public nn::Module {
 public:
  BottleneckImpl(int in, int mid, int out, int stride) {
    conv1 = register_module("conv1", conv(in, mid, 1));
    bn1 = register_module("bn1", nn::BatchNorm2d(mid));
    conv2 = register_module("conv2", conv(mid, mid, 3, stride, 1));
    bn2 = register_module("bn2", nn::BatchNorm2d(mid));
    conv3 = register_module("conv3", conv(mid, out, 1));
    bn3 = register_module("bn3", nn::BatchNorm2d(out));
    if (in != out || stride != 1) {
      down = register_module("down", conv(in, out, 1, stride));
      down_bn = register_module("down_bn", nn::BatchNorm2d(out));
    }
  }
  torch::Tensor forward(const torch::Tensor& x) {
    torch::Tensor y = torch::relu(bn1(conv1(x)));
    y = torch::relu(bn2(conv2(y)));
    y = bn3(conv3(y));
    return torch::relu(y + (down ? down_bn(down(x)) : x));
  }

  nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr}, down{nullptr};
  nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr}, down_bn{nullptr};
};
TORCH_MODULE(Bottleneck);

// Two rounds of ReLU -> depthwise 3x3 -> pointwise 1x1 -> BN, with an
// identity or strided 1x1 shortcut.
class SeparableCellImpl : public nn::Module {
 public:
  SeparableCellImpl(int in, int out, int stride) {
    dw1 = register_module("dw1", conv(in, in, 3, stride, 1, in));
    pw1 = register_module("pw1", conv(in, out, 1));
    bn1 = register_module("bn1", nn::BatchNorm2d(out));
    dw2 = register_module("dw2", conv(out, out, 3, 1, 1, out));
    pw2 = register_module("pw2", conv(out, out, 1));
    bn2 = register_module("bn2", nn::BatchNorm2d(out));
    if (in != out || stride != 1) {
      shortcut = register_module("shortcut", conv(in, out, 1, stride));
      shortcut_bn = register_module("shortcut_bn", nn::BatchNorm2d(out));
    }
  }
  torch::Tensor forward(const torch::Tensor& x) {
    torch::Tensor y = bn1(pw1(dw1(torch::relu(x))));
    y = bn2(pw2(dw2(torch::relu(y))));
    return y + (shortcut ? shortcut_bn(shortcut(x)) : x);
  }

  nn::Conv2d dw1{nullptr}, pw1{nullptr}, dw2{nullptr}, pw2{nullptr}, shortcut{nullptr};
  nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, shortcut_bn{nullptr};
};
TORCH_MODULE(SeparableCell);

FeaturePyramid run_stages(nn::Sequential& stem, std::vector<nn::Sequential>& stages, const torch::Tensor& x) {
  FeaturePyramid pyr;
  torch::Tensor y = stem->forward(x);
  int stride = 4;
  for (auto& stage : stages) {
    y = stage->forward(y);
    pyr.levels.emplace(stride, y);
    stride *= 2;
  }
  return pyr;
}

}  // namespace

TinyReferenceBackbone::TinyReferenceBackbone(double wm) {
  const int c0 = scale(32, wm);
  stem_ = register_module("stem", nn::Sequential(conv(3, c0, 3, 2, 1), nn::BatchNorm2d(c0), nn::ReLU()));
  int in = c0;
  int stride = 4;
  for (int base : {64, 128, 256, 512}) {
    const int out = scale(base, wm);
    stages_.push_back(register_module("stage" + std::to_string(stride), nn::Sequential(DownBlock(in, out))));
    channels_[stride] = out;
    in = out;
    stride *= 2;
  }
}

FeaturePyramid TinyReferenceBackbone::forward(const torch::Tensor& x) { return run_stages(stem_, stages_, x); }
std::map<int, int> TinyReferenceBackbone::channels() const { return channels_; }

BottleneckResNetBackbone::BottleneckResNetBackbone(double wm) {
  const int c0 = scale(64, wm);
  stem_ = register_module(
      "stem", nn::Sequential(conv(3, c0, 7, 2, 3), nn::BatchNorm2d(c0), nn::ReLU(),
                             nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1))));
  const int blocks[] = {3, 4, 6, 3};
  int in = c0;
  int stride = 4;
  for (int i = 0; i < 4; ++i) {
    const int mid = scale(64 << i, wm);
    const int out = scale(256 << i, wm);
    nn::Sequential stage;
    for (int b = 0; b < blocks[i]; ++b) {
      stage->push_back(Bottleneck(b == 0 ? in : out, mid, out, (b == 0 && i > 0) ? 2 : 1));
    }
    stages_.push_back(register_module("layer" + std::to_string(i + 1), stage));
    channels_[stride] = out;
    in = out;
    stride *= 2;
  }
}

FeaturePyramid BottleneckResNetBackbone::forward(const torch::Tensor& x) { return run_stages(stem_, stages_, x); }
std::map<int, int> BottleneckResNetBackbone::channels() const { return channels_; }

SeparableCellBackbone::SeparableCellBackbone(double wm) {
  const int c0 = scale(32, wm);
  stem_ = register_module("stem", nn::Sequential(conv(3, c0, 3, 2, 1), nn::BatchNorm2d(c0)));
  struct StageSpec {
    int channels;
    int normal_cells;
  };
  const StageSpec specs[] = {{44, 0}, {264, 2}, {528, 2}, {1056, 1}};
  int in = c0;
  int stride = 4;
  for (const auto& s : specs) {
    const int out = scale(s.channels, wm);
    nn::Sequential stage(SeparableCell(in, out, 2));
    for (int k = 0; k < s.normal_cells; ++k) stage->push_back(SeparableCell(out, out, 1));
    stages_.push_back(register_module("cells" + std::to_string(stride), stage));
    channels_[stride] = out;
    in = out;
    stride *= 2;
  }
}

FeaturePyramid SeparableCellBackbone::forward(const torch::Tensor& x) { return run_stages(stem_, stages_, x); }
std::map<int, int> SeparableCellBackbone::channels() const { return channels_; }

std::filesystem::path pretrained_weights_path(BackboneId id) {
  const char* dir = std::getenv("LAPSEG_WEIGHTS_DIR");
  return std::filesystem::path(dir ? dir : "weights") / (std::string(to_string(id)) + ".pt");
}

std::shared_ptr<Backbone> make_backbone(const EncoderSpec& spec, double width_multiplier) {
  std::shared_ptr<Backbone> backbone;
  switch (spec.backbone_id) {
    case BackboneId::backbone_a: backbone = std::make_shared<SeparableCellBackbone>(width_multiplier); break;
    case BackboneId::backbone_b: backbone = std::make_shared<BottleneckResNetBackbone>(width_multiplier); break;
    case BackboneId::tiny_reference: backbone = std::make_shared<TinyReferenceBackbone>(width_multiplier); break;
  }
  if (spec.pretrained) {
    const auto path = pretrained_weights_path(spec.backbone_id);
    if (!std::filesystem::is_regular_file(path))
      throw Error(ErrorCode::weights_unavailable,
                  "no pretrained weights for " + std::string(to_string(spec.backbone_id)) + " at " +
                      path.string() + " (set LAPSEG_WEIGHTS_DIR or disable pretrained)");
    std::shared_ptr<torch::nn::Module> as_module = backbone;
    try {
      torch::load(as_module, path.string());
    } catch (const c10::Error& e) {
      throw Error(ErrorCode::weights_unavailable, path.string() + ": " + e.what_without_backtrace());
    }
  }
  if (spec.frozen)
    for (auto& p : backbone->parameters()) p.set_requires_grad(false);
  return backbone;
}

}  // namespace lapseg::model
