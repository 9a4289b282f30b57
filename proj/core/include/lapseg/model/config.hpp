#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapseg/types.hpp"

namespace lapseg::model {

/// backbone_a is the separable-cell (NASNet-Mobile-class) extractor,
/// backbone_b the bottleneck-residual (ResNet50-class) one.
enum class BackboneId { backbone_a, backbone_b, tiny_reference };

std::string_view to_string(BackboneId id);
BackboneId parse_backbone_id(std::string_view text);

struct EncoderSpec {
  BackboneId backbone_id = BackboneId::tiny_reference;
  bool pretrained = false;
  std::vector<int> output_strides{4, 8, 16, 32};
  bool frozen = false;

  void validate() const;
  bool operator==(const EncoderSpec&) const = default;
};

struct DecoderBlockSpec {
  int out_channels = 64;
  std::vector<int> aspp_dilation_rates{1, 6, 12};
  int se_reduction = 16;
  int num_residual_blocks = 2;
  bool aspp_pooling = true;

  void validate() const;
  bool operator==(const DecoderBlockSpec&) const = default;
};

inline constexpr std::string_view kCascadeArchitecture = "dual_backbone_cascade";

struct ModelConfig {
  EncoderSpec encoder_a;
  EncoderSpec encoder_b;
  // One block per doubling from the bottleneck stride down to full resolution.
  std::vector<DecoderBlockSpec> decoder_blocks;
  Size2 input_size = kDefaultTargetSize;
  double width_multiplier = 1.0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;

  /// Separable-cell + bottleneck-residual backbones, decoder widths
  /// 256/128/64/32/16.
  static ModelConfig full_size(bool pretrained = true);
  /// Two tiny_reference backbones; the whole network is scaled by
  /// `width_multiplier`.
  static ModelConfig tiny(double width_multiplier = 0.125, Size2 input_size = kDefaultTargetSize);
};

/// Strides carrying skip connections (output strides minus the bottleneck).
std::vector<int> skip_strides(const ModelConfig& config);
int bottleneck_stride(const ModelConfig& config);

/// Decoder width after scaling by the width multiplier and rounding up to a
/// multiple of the SE reduction.
int effective_channels(const DecoderBlockSpec& spec, double width_multiplier);

void to_json(nlohmann::json& j, const EncoderSpec& s);
void from_json(const nlohmann::json& j, EncoderSpec& s);
void to_json(nlohmann::json& j, const DecoderBlockSpec& s);
void from_json(const nlohmann::json& j, DecoderBlockSpec& s);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Hex digest of the canonical JSON form.
std::string config_hash(const ModelConfig& config);
std::string config_hash(const nlohmann::json& model_config);

}  // namespace lapseg::model
