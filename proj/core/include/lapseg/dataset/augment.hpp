#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "lapseg/dataset/image.hpp"

namespace lapseg::dataset {

// Application order is the enumeration order.
enum class AugOp { center_crop, random_crop, hflip, vflip, scale, cutout, grayscale };

inline constexpr std::array<AugOp, 7> kAllAugOps = {
    AugOp::center_crop, AugOp::random_crop, AugOp::hflip,    AugOp::vflip,
    AugOp::scale,       AugOp::cutout,      AugOp::grayscale};

std::string_view to_string(AugOp op);
AugOp parse_aug_op(std::string_view text);
bool is_geometric(AugOp op);

struct AugmentationConfig {
  std::set<AugOp> enabled;
  double default_probability = 0.5;
  std::map<AugOp, double> probability;  // overrides default_probability
  std::pair<double, double> crop_fraction_range{0.7, 1.0};
  std::pair<double, double> scale_range{0.75, 1.25};
  double cutout_size_fraction = 0.25;
  std::uint64_t seed = 0;
  Size2 target_size = kDefaultTargetSize;
  Interpolation image_interpolation = Interpolation::bilinear;

  /// Every op enabled at the default probability.
  static AugmentationConfig all_ops(std::uint64_t seed = 0);

  double probability_of(AugOp op) const;
  void validate() const;
};

/// {"ops": [...], "probability": p, "op_probability": {op: p}, "crop_fraction": [lo, hi],
/// "scale_range": [lo, hi], "cutout_fraction": f, "seed": s, "image_interpolation": name}.
/// Missing keys keep their defaults.
void to_json(nlohmann::json& j, const AugmentationConfig& c);
void from_json(const nlohmann::json& j, AugmentationConfig& c);

struct Window {
  int y = 0;
  int x = 0;
  int height = 0;
  int width = 0;

  bool operator==(const Window&) const = default;
};

/// Concrete parameters drawn for one (sample, epoch). Each window is expressed
/// in the coordinates of the image as it stands when that op runs.
struct AugmentationPlan {
  std::optional<Window> center_crop;
  std::optional<Window> random_crop;
  bool hflip = false;
  bool vflip = false;
  std::optional<double> scale;
  std::optional<Window> cutout;
  bool grayscale = false;

  bool applies(AugOp op) const;
  bool is_identity() const;
};

AugmentationPlan sample_plan(const AugmentationConfig& config, int height, int width,
                             std::uint64_t sample_index, std::uint64_t epoch);

/// Runs the plan. When `target` is set the result is resized to it
/// (image with `image_interp`, mask nearest-neighbour).
std::pair<ImageTensor, MaskTensor> apply_plan(const ImageTensor& image, const MaskTensor& mask,
                                              const AugmentationPlan& plan,
                                              std::optional<Size2> target,
                                              Interpolation image_interp = Interpolation::bilinear);

std::pair<ImageTensor, MaskTensor> augment(const ImageTensor& image, const MaskTensor& mask,
                                           const AugmentationConfig& config,
                                           std::uint64_t sample_index, std::uint64_t epoch);

// Building blocks, exposed for tests.
ImageTensor crop(const ImageTensor& image, const Window& w);
MaskTensor crop(const MaskTensor& mask, const Window& w);
ImageTensor flip(const ImageTensor& image, bool horizontal);
MaskTensor flip(const MaskTensor& mask, bool horizontal);
ImageTensor to_grayscale(const ImageTensor& image);

}  // namespace lapseg::dataset
