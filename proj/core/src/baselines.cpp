#include "styleguide/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "styleguide/errors.hpp"

namespace styleguide {
namespace {

double transfer_loss(const Image& x, const Image& content, const StyleFeatures& ref, const PyramidConfig& cfg,
                     double content_weight) {
  const double style = style_distance(extract(x, cfg, ref.weights), ref, Distance::MSE);
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - content[i];
    sq += d * d;
  }
  return style + content_weight * sq / static_cast<double>(x.size());
}

}  // namespace

TransferResult iterative_transfer(const Image& content, const StyleFeatures& style_ref, const TransferConfig& config) {
  if (config.iterations < 0) throw ConfigError("transfer iterations must be non-negative");
  if (!(config.step_size > 0.0)) throw ConfigError("transfer step size must be positive");
  if (!(config.content_weight >= 0.0)) throw ConfigError("content weight must be non-negative");
  PyramidConfig cfg = config.pyramid;
  cfg.levels = style_ref.levels;
  if (style_ref.channels_per_level != 3 * content.channels()) {
    throw DimensionError("style reference was extracted from images with a different channel count");
  }

  // Steps are taken in feature units: every per-channel mean or std moves by
  // O(step_size) per unit of its error regardless of image size or feature count.
  const double precondition =
      static_cast<double>(content.height()) * content.width() * static_cast<double>(style_ref.dim()) / 2.0;
  const double pixels = static_cast<double>(content.size());

  TransferResult out{content, {}};
  out.loss_trace.reserve(static_cast<std::size_t>(config.iterations) + 1);
  out.loss_trace.push_back(transfer_loss(out.image, content, style_ref, cfg, config.content_weight));
  for (int it = 0; it < config.iterations; ++it) {
    Image grad = style_distance_grad(out.image, style_ref, cfg, style_ref.weights, Distance::MSE);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad[i] += 2.0 * config.content_weight * (out.image[i] - content[i]) / pixels;
    }
    add_scaled_inplace(out.image, grad, -config.step_size * precondition);
    const double loss = transfer_loss(out.image, content, style_ref, cfg, config.content_weight);
    if (!std::isfinite(loss) || !out.image.all_finite()) {
      throw DivergedError("iterative transfer diverged at iteration " + std::to_string(it));
    }
    out.loss_trace.push_back(loss);
  }
  return out;
}

Image moment_match_transfer(const Image& content, const StyleFeatures& style_stats, const PyramidConfig& pyramid) {
  const int colors = content.channels();
  if (style_stats.channels_per_level != 3 * colors || style_stats.levels < 1) {
    throw DimensionError("style statistics do not match the content channel count");
  }
  const double w0 = style_stats.weights.at(0);
  if (!(w0 > 0.0)) throw ConfigError("moment matching needs a positive level-0 weight in the style statistics");

  const auto n = static_cast<double>(content.height()) * content.width();
  Image out = content;
  for (int c = 0; c < colors; ++c) {
    double mean = 0.0;
    for (int y = 0; y < content.height(); ++y) {
      for (int x = 0; x < content.width(); ++x) mean += content.at(y, x, c);
    }
    mean /= n;
    double var = 0.0;
    for (int y = 0; y < content.height(); ++y) {
      for (int x = 0; x < content.width(); ++x) {
        const double d = content.at(y, x, c) - mean;
        var += d * d;
      }
    }
    var /= n;
    if (var <= 1e-14) continue;

    const double target_mean = style_stats.values[style_stats.mean_index(0, c)] / w0;
    const double target_std = style_stats.values[style_stats.std_index(0, c)] / w0;
    // Reference stds carry epsilon_var under the root; match that exactly.
    const double target_var = std::max(0.0, target_std * target_std - pyramid.epsilon_var);
    const double gain = std::sqrt(target_var / var);
    for (int y = 0; y < content.height(); ++y) {
      for (int x = 0; x < content.width(); ++x) {
        out.at(y, x, c) = (content.at(y, x, c) - mean) * gain + target_mean;
      }
    }
  }
  return out;
}

}  // namespace styleguide
