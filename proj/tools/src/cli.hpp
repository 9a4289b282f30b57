#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "lapseg/dataset/image.hpp"
#include "lapseg/error.hpp"
#include "lapseg/model/segmenter.hpp"

namespace lapseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// 2 for bad input or configuration, 1 for everything else.
int exit_code_for(ErrorCode code);

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Inference at the segmenter's resolution, thresholded at `threshold` and
/// brought back to the image's own size with nearest-neighbour upsampling.
dataset::MaskTensor predict_mask(model::Segmenter& segmenter, const dataset::ImageTensor& image,
                                 double threshold = 0.5);

inline constexpr std::array<float, 3> kOverlayTint{0.0f, 1.0f, 0.0f};
inline constexpr float kOverlayAlpha = 0.5f;

/// Instrument pixels blended towards kOverlayTint at kOverlayAlpha.
dataset::ImageTensor overlay(const dataset::ImageTensor& image, const dataset::MaskTensor& mask);

}  // namespace lapseg::cli
