#pragma once

#include <string>
#include <string_view>

namespace lapseg {

/// Image extent in pixels.
struct Size2 {
  int width = 0;
  int height = 0;

  bool operator==(const Size2&) const = default;
};

inline constexpr Size2 kDefaultTargetSize{512, 256};

/// Parses "512x256" (width x height).
Size2 parse_size(std::string_view text);
std::string to_string(Size2 size);

}  // namespace lapseg
