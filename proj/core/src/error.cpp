#include "lapseg/error.hpp"

namespace lapseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::missing_mask: return "MissingMask";
    case ErrorCode::unreadable_image: return "UnreadableImage";
    case ErrorCode::empty_dataset: return "EmptyDataset";
    case ErrorCode::bad_ratios: return "BadRatios";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::crop_larger_than_image: return "CropLargerThanImage";
    case ErrorCode::invalid_manifest: return "InvalidManifest";
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::weights_unavailable: return "WeightsUnavailable";
    case ErrorCode::incompatible_strides: return "IncompatibleStrides";
    case ErrorCode::shape_error: return "ShapeError";
    case ErrorCode::stride_set_mismatch: return "StrideSetMismatch";
    case ErrorCode::skip_shape_mismatch: return "SkipShapeMismatch";
    case ErrorCode::non_finite_activation: return "NonFiniteActivation";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::non_binary_target: return "NonBinaryTarget";
    case ErrorCode::empty_list: return "EmptyList";
    case ErrorCode::non_finite_loss: return "NonFiniteLoss";
    case ErrorCode::out_of_memory: return "OutOfMemory";
    case ErrorCode::config_hash_mismatch: return "ConfigHashMismatch";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

}  // namespace lapseg
