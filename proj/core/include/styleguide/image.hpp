#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "styleguide/rng.hpp"

namespace styleguide {

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 3;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense H x W x C raster, row-major with interleaved channels.
class Image {
 public:
  Image() = default;
  explicit Image(Shape shape, double fill = 0.0);
  Image(int height, int width, int channels, double fill = 0.0) : Image(Shape{height, width, channels}, fill) {}
  Image(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  int channels() const noexcept { return shape_.channels; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(shape_.width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(shape_.channels) +
           static_cast<std::size_t>(c);
  }
  double& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

  bool all_finite() const noexcept;
  double max_abs() const noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

void require_same_shape(const Image& a, const Image& b, const char* what);

// out = a + scale * b
Image add_scaled(const Image& a, const Image& b, double scale);
void add_scaled_inplace(Image& a, const Image& b, double scale);
Image scaled(const Image& a, double scale);
double dot(const Image& a, const Image& b);
double l2_norm(const Image& a);
double mean_value(const Image& a);

// I.i.d. standard normal entries; entry i is the i-th normal draw of `rng`.
Image gaussian_noise(Shape shape, RngStream& rng);

// 2x2 block mean. Odd trailing row/column is dropped.
Image avg_pool2(const Image& img);
// Adjoint of avg_pool2: spreads each output gradient evenly over its block.
Image avg_pool2_backward(const Image& grad_out, Shape input_shape);

// Output channels [0, C) copy the input, [C, 2C) hold forward horizontal
// differences x(y, x+1) - x(y, x), [2C, 3C) forward vertical differences.
// The last column / row of each difference group is zero.
Image diff_channels(const Image& img);
Image diff_channels_backward(const Image& grad_out, Shape input_shape);

}  // namespace styleguide
