#include "styleguide/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "styleguide/errors.hpp"

namespace styleguide {
namespace {

void require_positive(Shape shape) {
  if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
    throw DimensionError("image dimensions must be positive, got " + std::to_string(shape.height) + "x" +
                         std::to_string(shape.width) + "x" + std::to_string(shape.channels));
  }
}

void require_at_least_2x2(const Image& img, const char* op) {
  if (img.height() < 2 || img.width() < 2) {
    throw DimensionError(std::string(op) + " needs height and width >= 2, got " + std::to_string(img.height()) + "x" +
                         std::to_string(img.width()));
  }
}

}  // namespace

Image::Image(Shape shape, double fill) : shape_(shape) {
  require_positive(shape);
  data_.assign(shape.size(), fill);
}

Image::Image(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  require_positive(shape);
  if (data_.size() != shape.size()) {
    throw DimensionError("image data length " + std::to_string(data_.size()) + " does not match shape size " +
                         std::to_string(shape.size()));
  }
}

bool Image::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Image::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                         std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                         std::to_string(b.channels()));
  }
}

Image add_scaled(const Image& a, const Image& b, double scale) {
  Image out = a;
  add_scaled_inplace(out, b, scale);
  return out;
}

void add_scaled_inplace(Image& a, const Image& b, double scale) {
  require_same_shape(a, b, "add_scaled");
  auto dst = a.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

Image scaled(const Image& a, double scale) {
  Image out = a;
  for (double& v : out.data()) v *= scale;
  return out;
}

double dot(const Image& a, const Image& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const Image& a) { return std::sqrt(dot(a, a)); }

double mean_value(const Image& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s / static_cast<double>(a.size());
}

Image gaussian_noise(Shape shape, RngStream& rng) {
  Image out(shape);
  for (double& v : out.data()) v = rng.normal();
  return out;
}

Image avg_pool2(const Image& img) {
  require_at_least_2x2(img, "avg_pool2");
  const int h = img.height() / 2;
  const int w = img.width() / 2;
  const int c = img.channels();
  Image out(h, w, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        out.at(y, x, k) = 0.25 * (img.at(2 * y, 2 * x, k) + img.at(2 * y, 2 * x + 1, k) +
                                  img.at(2 * y + 1, 2 * x, k) + img.at(2 * y + 1, 2 * x + 1, k));
      }
    }
  }
  return out;
}

Image avg_pool2_backward(const Image& grad_out, Shape input_shape) {
  if (grad_out.height() != input_shape.height / 2 || grad_out.width() != input_shape.width / 2 ||
      grad_out.channels() != input_shape.channels) {
    throw DimensionError("avg_pool2_backward: gradient shape does not match pooled input shape");
  }
  Image grad_in(input_shape);
  for (int y = 0; y < grad_out.height(); ++y) {
    for (int x = 0; x < grad_out.width(); ++x) {
      for (int k = 0; k < grad_out.channels(); ++k) {
        const double g = 0.25 * grad_out.at(y, x, k);
        grad_in.at(2 * y, 2 * x, k) = g;
        grad_in.at(2 * y, 2 * x + 1, k) = g;
        grad_in.at(2 * y + 1, 2 * x, k) = g;
        grad_in.at(2 * y + 1, 2 * x + 1, k) = g;
      }
    }
  }
  return grad_in;
}

Image diff_channels(const Image& img) {
  require_at_least_2x2(img, "diff_channels");
  const int h = img.height();
  const int w = img.width();
  const int c = img.channels();
  Image out(h, w, 3 * c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        const double v = img.at(y, x, k);
        out.at(y, x, k) = v;
        out.at(y, x, c + k) = x + 1 < w ? img.at(y, x + 1, k) - v : 0.0;
        out.at(y, x, 2 * c + k) = y + 1 < h ? img.at(y + 1, x, k) - v : 0.0;
      }
    }
  }
  return out;
}

Image diff_channels_backward(const Image& grad_out, Shape input_shape) {
  const int h = input_shape.height;
  const int w = input_shape.width;
  const int c = input_shape.channels;
  if (grad_out.height() != h || grad_out.width() != w || grad_out.channels() != 3 * c) {
    throw DimensionError("diff_channels_backward: gradient shape does not match input shape");
  }
  Image grad_in(input_shape);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        double g = grad_out.at(y, x, k);
        if (x + 1 < w) g -= grad_out.at(y, x, c + k);
        if (x > 0) g += grad_out.at(y, x - 1, c + k);
        if (y + 1 < h) g -= grad_out.at(y, x, 2 * c + k);
        if (y > 0) g += grad_out.at(y - 1, x, 2 * c + k);
        grad_in.at(y, x, k) = g;
      }
    }
  }
  return grad_in;
}

}  // namespace styleguide
