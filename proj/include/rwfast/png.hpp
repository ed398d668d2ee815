#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace rwfast {

/// 8-bit grayscale PNG, rows top to bottom.
std::string encode_png_gray8(int width, int height, std::span<const std::uint8_t> pixels);

}  // namespace rwfast
