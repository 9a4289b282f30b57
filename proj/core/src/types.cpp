#include "lapseg/types.hpp"

#include <charconv>

#include "lapseg/error.hpp"

namespace lapseg {

Size2 parse_size(std::string_view text) {
  const auto x = text.find_first_of("xX");
  Size2 s;
  auto parse = [&](std::string_view part, int& out) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    return ec == std::errc() && ptr == part.data() + part.size();
  };
  if (x == std::string_view::npos || !parse(text.substr(0, x), s.width) ||
      !parse(text.substr(x + 1), s.height) || s.width <= 0 || s.height <= 0)
    throw Error(ErrorCode::invalid_config, "expected WIDTHxHEIGHT, got '" + std::string(text) + "'");
  return s;
}

std::string to_string(Size2 size) {
  return std::to_string(size.width) + "x" + std::to_string(size.height);
}

}  // namespace lapseg
