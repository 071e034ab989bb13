#pragma once

#include <vector>

#include "styleguide/image.hpp"
#include "styleguide/style.hpp"

namespace styleguide {

struct TransferConfig {
  int iterations = 200;
  double step_size = 0.05;
  double content_weight = 1.0;
  PyramidConfig pyramid{};
};

struct TransferResult {
  Image image;
  std::vector<double> loss_trace;  // iterations + 1 entries, starting at the content image
};

// Gradient descent on MSE(f(x), style_ref) + content_weight * mean((x - content)^2),
// starting from the content image. f uses the weights stored in style_ref.
TransferResult iterative_transfer(const Image& content, const StyleFeatures& style_ref, const TransferConfig& config);

// Per colour channel: x' = (x - mean_x) / std_x * std_y + mean_y, using the
// level-0 identity-channel statistics of style_stats. Constant channels pass through.
Image moment_match_transfer(const Image& content, const StyleFeatures& style_stats, const PyramidConfig& pyramid = {});

}  // namespace styleguide
