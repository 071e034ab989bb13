#include "styleguide/templates.hpp"

#include <cmath>
#include <numbers>

#include "styleguide/errors.hpp"
#include "styleguide/rng.hpp"

namespace styleguide {
namespace {

std::uint64_t name_tag(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double square_wave(double phase) { return std::fmod(std::floor(phase), 2.0) == 0.0 ? 0.0 : 1.0; }

double pattern_weight(const StyleTemplate& tpl, double u, double v, double offset, RngStream& pixel_rng) {
  const double f = tpl.frequency;
  switch (tpl.pattern) {
    case Pattern::HorizontalStripes:
      return square_wave(2.0 * f * v + offset);
    case Pattern::VerticalStripes:
      return square_wave(2.0 * f * u + offset);
    case Pattern::DiagonalStripes:
      return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (f * (u + v) + offset));
    case Pattern::Checkerboard:
      return square_wave(2.0 * f * u + offset) == square_wave(2.0 * f * v) ? 0.0 : 1.0;
    case Pattern::RadialGradient: {
      const double r = std::hypot(u - 0.5, v - 0.5) / std::numbers::sqrt2 * 2.0;
      return std::min(1.0, r * f);
    }
    case Pattern::NoisePalette:
      return pixel_rng.uniform();
  }
  return 0.0;
}

}  // namespace

const std::vector<StyleTemplate>& template_catalog() {
  static const std::vector<StyleTemplate> catalog = {
      {"horizontal_stripes", Pattern::HorizontalStripes, {-0.8, -0.6, 0.4}, {0.8, 0.7, -0.2}, 4.0},
      {"vertical_stripes", Pattern::VerticalStripes, {0.6, -0.7, -0.6}, {-0.5, 0.6, 0.7}, 4.0},
      {"checkerboard", Pattern::Checkerboard, {-0.7, -0.2, -0.7}, {0.7, 0.8, 0.5}, 4.0},
      {"radial_gradient", Pattern::RadialGradient, {0.5, -0.5, 0.7}, {-0.4, 0.6, -0.6}, 1.0},
      {"diagonal_waves", Pattern::DiagonalStripes, {0.9, 0.4, -0.8}, {-0.9, -0.3, 0.2}, 2.0},
      {"fine_checker", Pattern::Checkerboard, {0.1, 0.5, 0.9}, {0.9, -0.1, -0.9}, 8.0},
      {"noise_palette", Pattern::NoisePalette, {-0.9, 0.3, 0.8}, {0.8, 0.9, -0.7}, 1.0},
      {"sunset_radial", Pattern::RadialGradient, {0.9, 0.8, -0.5}, {-0.2, -0.8, 0.4}, 1.4},
  };
  return catalog;
}

const StyleTemplate& find_template(const std::string& name) {
  for (const auto& t : template_catalog()) {
    if (t.name == name) return t;
  }
  std::string known;
  for (const auto& t : template_catalog()) known += (known.empty() ? "" : ", ") + t.name;
  throw ConfigError("unknown style template '" + name + "' (known: " + known + ")");
}

std::vector<std::string> template_names() {
  std::vector<std::string> names;
  for (const auto& t : template_catalog()) names.push_back(t.name);
  return names;
}

Image render_template(const StyleTemplate& tpl, Shape shape, std::uint64_t seed) {
  Image img(shape);
  RngStream rng = RngStream(seed, stream_tag::kTemplate).derive(name_tag(tpl.name));
  // Seed only shifts the pattern phase (and drives the noise palette).
  const double offset = tpl.pattern == Pattern::NoisePalette ? 0.0 : std::floor(rng.uniform() * 2.0);
  RngStream pixel_rng = rng.derive(1);
  for (int y = 0; y < shape.height; ++y) {
    for (int x = 0; x < shape.width; ++x) {
      const double u = (x + 0.5) / shape.width;
      const double v = (y + 0.5) / shape.height;
      const double w = pattern_weight(tpl, u, v, offset, pixel_rng);
      for (int c = 0; c < shape.channels; ++c) {
        const auto k = static_cast<std::size_t>(c % 3);
        img.at(y, x, c) = (1.0 - w) * tpl.color_a[k] + w * tpl.color_b[k];
      }
    }
  }
  return img;
}

Image render_template(const std::string& name, Shape shape, std::uint64_t seed) {
  return render_template(find_template(name), shape, seed);
}

}  // namespace styleguide
