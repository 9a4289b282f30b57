#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lapseg {

enum class ErrorCode {
  // dataset
  missing_mask,
  unreadable_image,
  empty_dataset,
  bad_ratios,
  dimension_mismatch,
  crop_larger_than_image,
  invalid_manifest,
  // model
  invalid_config,
  weights_unavailable,
  incompatible_strides,
  shape_error,
  stride_set_mismatch,
  skip_shape_mismatch,
  non_finite_activation,
  // metrics / loss
  shape_mismatch,
  non_binary_target,
  empty_list,
  // training
  non_finite_loss,
  out_of_memory,
  config_hash_mismatch,
  io_error,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lapseg
