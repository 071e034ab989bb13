#pragma once

#include <span>
#include <string>
#include <vector>

#include "styleguide/image.hpp"
#include "styleguide/rng.hpp"

namespace styleguide {

struct PyramidConfig {
  int levels = 4;
  double epsilon_var = 1e-8;
};

enum class Distance { MAE, MSE };

// Weighted per-level, per-channel (mean, std) statistics of an image pyramid.
// Level l holds 2 * channels_per_level values: all means, then all stds, each
// multiplied by weights[l].
struct StyleFeatures {
  int levels = 0;
  int channels_per_level = 0;
  std::vector<double> weights;
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  std::size_t block_size() const noexcept { return 2 * static_cast<std::size_t>(channels_per_level); }
  std::size_t mean_index(int level, int channel) const noexcept {
    return static_cast<std::size_t>(level) * block_size() + static_cast<std::size_t>(channel);
  }
  std::size_t std_index(int level, int channel) const noexcept {
    return mean_index(level, channel) + static_cast<std::size_t>(channels_per_level);
  }
  std::span<const double> level_block(int level) const noexcept {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(level) * block_size(), block_size());
  }
};

std::vector<double> equal_weights(int levels);

// Throws DimensionError when img is too small for cfg.levels pyramid levels.
void require_pyramid_fits(Shape shape, const PyramidConfig& cfg);

StyleFeatures extract(const Image& img, const PyramidConfig& cfg, std::span<const double> weights);

double style_distance(const StyleFeatures& a, const StyleFeatures& b, Distance metric);

// d distance / d a, with the MAE subgradient at a zero coordinate taken as 0.
std::vector<double> style_distance_feature_grad(const StyleFeatures& a, const StyleFeatures& b, Distance metric);

// Pulls a gradient on the feature vector of extract(x, cfg, weights) back to pixels.
Image backprop_features(const Image& x, const PyramidConfig& cfg, std::span<const double> weights,
                        std::span<const double> feature_grad);

Image style_distance_grad(const Image& x, const StyleFeatures& f_ref, const PyramidConfig& cfg,
                          std::span<const double> weights, Distance metric);

// Level l of the result is copied from batch[r_l], r_l drawn uniformly from `rng`.
StyleFeatures mixed_features(std::span<const StyleFeatures> batch, RngStream& rng);

struct FeatureVariance {
  double value = 0.0;
  std::vector<std::vector<double>> feature_grads;  // d value / d f_b
};

// Mean over coordinates of the population variance across the batch.
FeatureVariance feature_variance(std::span<const StyleFeatures> batch);

struct FeatureVarianceImages {
  double value = 0.0;
  std::vector<Image> grads;  // d value / d image_b
};

FeatureVarianceImages feature_variance_grad(std::span<const Image> batch, const PyramidConfig& cfg,
                                            std::span<const double> weights);

// CSV serialization: header labels look like "l0_c3_mean".
std::string features_csv_header(const StyleFeatures& f);
std::string features_csv_row(const StyleFeatures& f);

}  // namespace styleguide
