#include "styleguide/ppm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "styleguide/errors.hpp"

namespace styleguide {

std::uint8_t quantize(double v) noexcept {
  const double clamped = std::clamp(v, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::floor((clamped + 1.0) * 127.5 + 0.5));
}

double dequantize(std::uint8_t byte) noexcept { return static_cast<double>(byte) / 127.5 - 1.0; }

void emit_image(const Image& img, const std::filesystem::path& path) {
  if (img.channels() != 3) {
    throw DimensionError("PPM output needs 3 channels, got " + std::to_string(img.channels()));
  }
  std::vector<char> payload(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) payload[i] = static_cast<char>(quantize(img[i]));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  int ch = 0;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch) != 0) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  if (token.empty()) throw IoError("truncated PPM header in " + path.string());
  return token;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in, path);
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || v <= 0) throw IoError("bad PPM header field '" + tok + "' in " + path.string());
  return v;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (header_token(in, path) != "P6") throw IoError(path.string() + " is not a binary PPM (P6)");
  const int width = header_int(in, path);
  const int height = header_int(in, path);
  const int maxval = header_int(in, path);
  if (maxval != 255) throw IoError(path.string() + ": only 8-bit PPM is supported");
  Image img(height, width, 3);
  std::vector<char> payload(img.size());
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (in.gcount() != static_cast<std::streamsize>(payload.size())) throw IoError("truncated PPM payload in " + path.string());
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = dequantize(static_cast<std::uint8_t>(payload[i]));
  return img;
}

}  // namespace styleguide
