#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "styleguide/image.hpp"

namespace styleguide {

enum class Pattern { HorizontalStripes, VerticalStripes, DiagonalStripes, Checkerboard, RadialGradient, NoisePalette };

using Color = std::array<double, 3>;

// Procedural stand-in for a style reference image. Rendering is a pure
// function of (template, shape, seed).
struct StyleTemplate {
  std::string name;
  Pattern pattern = Pattern::HorizontalStripes;
  Color color_a{};
  Color color_b{};
  double frequency = 4.0;  // periods across the image
};

const std::vector<StyleTemplate>& template_catalog();
const StyleTemplate& find_template(const std::string& name);
std::vector<std::string> template_names();

// Image values lie in [-1, 1]. Channels beyond the third repeat the palette cyclically.
Image render_template(const StyleTemplate& tpl, Shape shape, std::uint64_t seed);
Image render_template(const std::string& name, Shape shape, std::uint64_t seed);

}  // namespace styleguide
