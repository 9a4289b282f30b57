#include "lapseg/model/config.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <set>

#include "lapseg/error.hpp"

namespace lapseg::model {

std::string_view to_string(BackboneId id) {
  switch (id) {
    case BackboneId::backbone_a: return "backbone_a";
    case BackboneId::backbone_b: return "backbone_b";
    case BackboneId::tiny_reference: return "tiny_reference";
  }
  return "?";
}

BackboneId parse_backbone_id(std::string_view text) {
  if (text == "backbone_a") return BackboneId::backbone_a;
  if (text == "backbone_b") return BackboneId::backbone_b;
  if (text == "tiny_reference") return BackboneId::tiny_reference;
  throw Error(ErrorCode::invalid_config, "unknown backbone '" + std::string(text) + "'");
}

void EncoderSpec::validate() const {
  static const std::set<int> allowed{4, 8, 16, 32};
  if (output_strides.empty() || output_strides.back() != 32)
    throw Error(ErrorCode::invalid_config, "output_strides must end with the stride-32 bottleneck");
  for (std::size_t i = 0; i < output_strides.size(); ++i) {
    if (!allowed.contains(output_strides[i]))
      throw Error(ErrorCode::invalid_config, "output stride " + std::to_string(output_strides[i]) +
                                                 " not in {4, 8, 16, 32}");
    if (i > 0 && output_strides[i] <= output_strides[i - 1])
      throw Error(ErrorCode::invalid_config, "output_strides must be strictly increasing");
  }
}

void DecoderBlockSpec::validate() const {
  if (out_channels <= 0) throw Error(ErrorCode::invalid_config, "out_channels must be positive");
  if (se_reduction <= 0) throw Error(ErrorCode::invalid_config, "se_reduction must be positive");
  if (out_channels % se_reduction != 0)
    throw Error(ErrorCode::invalid_config, "se_reduction must divide out_channels");
  if (num_residual_blocks != 2)
    throw Error(ErrorCode::invalid_config, "decoder blocks use exactly two residual blocks");
  if (aspp_dilation_rates.empty()) throw Error(ErrorCode::invalid_config, "ASPP needs at least one rate");
  for (std::size_t i = 0; i < aspp_dilation_rates.size(); ++i) {
    if (aspp_dilation_rates[i] <= 0) throw Error(ErrorCode::invalid_config, "dilation rates must be positive");
    if (i > 0 && aspp_dilation_rates[i] <= aspp_dilation_rates[i - 1])
      throw Error(ErrorCode::invalid_config, "dilation rates must be distinct and sorted");
  }
}

int bottleneck_stride(const ModelConfig& config) { return config.encoder_a.output_strides.back(); }

std::vector<int> skip_strides(const ModelConfig& config) {
  const auto& s = config.encoder_a.output_strides;
  return {s.begin(), s.end() - 1};
}

void ModelConfig::validate() const {
  if (input_size.width <= 0 || input_size.height <= 0 || input_size.width % 32 || input_size.height % 32)
    throw Error(ErrorCode::invalid_config, "input size " + to_string(input_size) +
                                               ": width and height must be positive multiples of 32");
  if (!(width_multiplier > 0.0 && width_multiplier <= 1.0))
    throw Error(ErrorCode::invalid_config, "width_multiplier must lie in (0, 1]");
  encoder_a.validate();
  encoder_b.validate();
  if (encoder_a.output_strides != encoder_b.output_strides)
    throw Error(ErrorCode::incompatible_strides, "encoders expose different pyramid levels");
  const int doublings = std::countr_zero(unsigned(bottleneck_stride(*this)));
  if (int(decoder_blocks.size()) != doublings)
    throw Error(ErrorCode::invalid_config, "expected " + std::to_string(doublings) +
                                               " decoder blocks, got " +
                                               std::to_string(decoder_blocks.size()));
  for (const auto& b : decoder_blocks) b.validate();
}

namespace {

std::vector<DecoderBlockSpec> default_decoder() {
  std::vector<DecoderBlockSpec> blocks;
  const int widths[] = {256, 128, 64, 32, 16};
  for (int i = 0; i < 5; ++i) {
    DecoderBlockSpec b;
    b.out_channels = widths[i];
    // Block 0 runs at stride 16; everything finer uses the wider rates.
    b.aspp_dilation_rates = i == 0 ? std::vector<int>{1, 2, 4} : std::vector<int>{1, 6, 12};
    blocks.push_back(b);
  }
  return blocks;
}

}  // namespace

ModelConfig ModelConfig::full_size(bool pretrained) {
  ModelConfig c;
  c.encoder_a.backbone_id = BackboneId::backbone_a;
  c.encoder_b.backbone_id = BackboneId::backbone_b;
  c.encoder_a.pretrained = c.encoder_b.pretrained = pretrained;
  c.decoder_blocks = default_decoder();
  return c;
}

ModelConfig ModelConfig::tiny(double width_multiplier, Size2 input_size) {
  ModelConfig c;
  c.encoder_a.backbone_id = c.encoder_b.backbone_id = BackboneId::tiny_reference;
  c.decoder_blocks = default_decoder();
  c.width_multiplier = width_multiplier;
  c.input_size = input_size;
  return c;
}

int effective_channels(const DecoderBlockSpec& spec, double width_multiplier) {
  const int scaled = std::max(1, int(std::lround(spec.out_channels * width_multiplier)));
  return (scaled + spec.se_reduction - 1) / spec.se_reduction * spec.se_reduction;
}

void to_json(nlohmann::json& j, const EncoderSpec& s) {
  j = {{"backbone_id", to_string(s.backbone_id)},
       {"pretrained", s.pretrained},
       {"output_strides", s.output_strides},
       {"frozen", s.frozen}};
}

void from_json(const nlohmann::json& j, EncoderSpec& s) {
  s.backbone_id = parse_backbone_id(j.at("backbone_id").get<std::string>());
  s.pretrained = j.value("pretrained", false);
  s.output_strides = j.value("output_strides", std::vector<int>{4, 8, 16, 32});
  s.frozen = j.value("frozen", false);
}

void to_json(nlohmann::json& j, const DecoderBlockSpec& s) {
  j = {{"out_channels", s.out_channels},
       {"aspp_dilation_rates", s.aspp_dilation_rates},
       {"se_reduction", s.se_reduction},
       {"num_residual_blocks", s.num_residual_blocks},
       {"aspp_pooling", s.aspp_pooling}};
}

void from_json(const nlohmann::json& j, DecoderBlockSpec& s) {
  s.out_channels = j.at("out_channels").get<int>();
  s.aspp_dilation_rates = j.at("aspp_dilation_rates").get<std::vector<int>>();
  s.se_reduction = j.value("se_reduction", 16);
  s.num_residual_blocks = j.value("num_residual_blocks", 2);
  s.aspp_pooling = j.value("aspp_pooling", true);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"architecture", kCascadeArchitecture},
       {"encoder_a", c.encoder_a},
       {"encoder_b", c.encoder_b},
       {"decoder_blocks", c.decoder_blocks},
       {"input_size", {c.input_size.width, c.input_size.height}},
       {"width_multiplier", c.width_multiplier}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (j.value("architecture", std::string(kCascadeArchitecture)) != kCascadeArchitecture)
    throw Error(ErrorCode::invalid_config, "not a " + std::string(kCascadeArchitecture) + " config");
  c.encoder_a = j.at("encoder_a").get<EncoderSpec>();
  c.encoder_b = j.at("encoder_b").get<EncoderSpec>();
  c.decoder_blocks = j.at("decoder_blocks").get<std::vector<DecoderBlockSpec>>();
  const auto size = j.at("input_size").get<std::vector<int>>();
  if (size.size() != 2) throw Error(ErrorCode::invalid_config, "input_size must be [width, height]");
  c.input_size = {size[0], size[1]};
  c.width_multiplier = j.value("width_multiplier", 1.0);
}

std::string config_hash(const nlohmann::json& model_config) {
  // FNV-1a over the canonical dump (object keys are sorted by nlohmann::json).
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : model_config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ModelConfig& config) { return config_hash(nlohmann::json(config)); }

}  // namespace lapseg::model
