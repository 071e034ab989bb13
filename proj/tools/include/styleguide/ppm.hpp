#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "styleguide/image.hpp"

namespace styleguide {

// [-1, 1] -> [0, 255], clamped, rounded half up.
std::uint8_t quantize(double v) noexcept;
double dequantize(std::uint8_t byte) noexcept;

// Binary P6, 8 bits per channel. The image must have 3 channels.
void emit_image(const Image& img, const std::filesystem::path& path);

// Reads a binary P6 file (maxval 255) back into [-1, 1] values.
Image read_ppm(const std::filesystem::path& path);

}  // namespace styleguide
