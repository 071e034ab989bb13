#include "styleguide/style.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "styleguide/errors.hpp"

namespace styleguide {
namespace {

void require_weights(const PyramidConfig& cfg, std::span<const double> weights) {
  if (cfg.levels < 1) throw ConfigError("pyramid needs at least one level");
  if (!(cfg.epsilon_var > 0.0)) throw ConfigError("pyramid epsilon_var must be positive");
  if (weights.size() != static_cast<std::size_t>(cfg.levels)) {
    throw ConfigError("expected " + std::to_string(cfg.levels) + " level weights, got " +
                      std::to_string(weights.size()));
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("level weights must be finite and non-negative");
  }
}

void require_matching(const StyleFeatures& a, const StyleFeatures& b) {
  if (a.dim() != b.dim() || a.levels != b.levels || a.channels_per_level != b.channels_per_level) {
    throw DimensionError("style feature dimensions differ: " + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()));
  }
}

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;
};

ChannelStats channel_stats(const Image& rep, double epsilon_var) {
  const int nc = rep.channels();
  const auto n = static_cast<double>(rep.height()) * rep.width();
  ChannelStats s{std::vector<double>(static_cast<std::size_t>(nc), 0.0),
                 std::vector<double>(static_cast<std::size_t>(nc), 0.0)};
  const auto data = rep.data();
  for (std::size_t i = 0; i < data.size(); ++i) s.mean[i % static_cast<std::size_t>(nc)] += data[i];
  for (double& m : s.mean) m /= n;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double d = data[i] - s.mean[i % static_cast<std::size_t>(nc)];
    s.std[i % static_cast<std::size_t>(nc)] += d * d;
  }
  for (double& v : s.std) v = std::sqrt(v / n + epsilon_var);
  return s;
}

}  // namespace

std::vector<double> equal_weights(int levels) { return std::vector<double>(static_cast<std::size_t>(levels), 1.0); }

void require_pyramid_fits(Shape shape, const PyramidConfig& cfg) {
  const long need = 2L << (cfg.levels - 1);
  if (shape.height < need || shape.width < need) {
    throw DimensionError("image " + std::to_string(shape.height) + "x" + std::to_string(shape.width) +
                         " too small for " + std::to_string(cfg.levels) + " pyramid levels (needs " +
                         std::to_string(need) + ")");
  }
}

StyleFeatures extract(const Image& img, const PyramidConfig& cfg, std::span<const double> weights) {
  require_weights(cfg, weights);
  require_pyramid_fits(img.shape(), cfg);
  StyleFeatures f;
  f.levels = cfg.levels;
  f.channels_per_level = 3 * img.channels();
  f.weights.assign(weights.begin(), weights.end());
  f.values.reserve(static_cast<std::size_t>(cfg.levels) * f.block_size());
  Image level = img;
  for (int l = 0; l < cfg.levels; ++l) {
    if (l > 0) level = avg_pool2(level);
    const ChannelStats s = channel_stats(diff_channels(level), cfg.epsilon_var);
    const double w = weights[static_cast<std::size_t>(l)];
    for (double m : s.mean) f.values.push_back(w * m);
    for (double sd : s.std) f.values.push_back(w * sd);
  }
  return f;
}

double style_distance(const StyleFeatures& a, const StyleFeatures& b, Distance metric) {
  require_matching(a, b);
  double total = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a.values[i] - b.values[i];
    total += metric == Distance::MAE ? std::abs(d) : d * d;
  }
  return total / static_cast<double>(a.dim());
}

std::vector<double> style_distance_feature_grad(const StyleFeatures& a, const StyleFeatures& b, Distance metric) {
  require_matching(a, b);
  const auto n = static_cast<double>(a.dim());
  std::vector<double> g(a.dim(), 0.0);
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a.values[i] - b.values[i];
    if (metric == Distance::MSE) {
      g[i] = 2.0 * d / n;
    } else if (d > 0.0) {
      g[i] = 1.0 / n;
    } else if (d < 0.0) {
      g[i] = -1.0 / n;
    }
  }
  return g;
}

Image backprop_features(const Image& x, const PyramidConfig& cfg, std::span<const double> weights,
                        std::span<const double> feature_grad) {
  require_weights(cfg, weights);
  require_pyramid_fits(x.shape(), cfg);
  const int nc = 3 * x.channels();
  const std::size_t block = 2 * static_cast<std::size_t>(nc);
  if (feature_grad.size() != block * static_cast<std::size_t>(cfg.levels)) {
    throw DimensionError("feature gradient length does not match the pyramid");
  }

  std::vector<Image> pyramid{x};
  for (int l = 1; l < cfg.levels; ++l) pyramid.push_back(avg_pool2(pyramid.back()));

  // Walk coarse to fine so each level's gradient is folded into the finer one
  // with a single pooling adjoint per level.
  Image carried;
  for (int l = cfg.levels - 1; l >= 0; --l) {
    const Image& level = pyramid[static_cast<std::size_t>(l)];
    const Image rep = diff_channels(level);
    const ChannelStats s = channel_stats(rep, cfg.epsilon_var);
    const double w = weights[static_cast<std::size_t>(l)];
    const auto grads = feature_grad.subspan(static_cast<std::size_t>(l) * block, block);
    const auto n = static_cast<double>(level.height()) * level.width();

    Image g_rep(rep.shape());
    std::vector<double> g_mean(static_cast<std::size_t>(nc));
    std::vector<double> g_std(static_cast<std::size_t>(nc));
    for (std::size_t k = 0; k < static_cast<std::size_t>(nc); ++k) {
      g_mean[k] = w * grads[k] / n;
      g_std[k] = w * grads[static_cast<std::size_t>(nc) + k] / (n * s.std[k]);
    }
    const auto rd = rep.data();
    auto gd = g_rep.data();
    for (std::size_t i = 0; i < rd.size(); ++i) {
      const std::size_t k = i % static_cast<std::size_t>(nc);
      gd[i] = g_mean[k] + g_std[k] * (rd[i] - s.mean[k]);
    }
    Image g_level = diff_channels_backward(g_rep, level.shape());
    if (!carried.empty()) add_scaled_inplace(g_level, carried, 1.0);
    carried = l > 0 ? avg_pool2_backward(g_level, pyramid[static_cast<std::size_t>(l - 1)].shape()) : g_level;
  }
  return carried;
}

Image style_distance_grad(const Image& x, const StyleFeatures& f_ref, const PyramidConfig& cfg,
                          std::span<const double> weights, Distance metric) {
  const StyleFeatures f = extract(x, cfg, weights);
  const std::vector<double> g = style_distance_feature_grad(f, f_ref, metric);
  return backprop_features(x, cfg, weights, g);
}

StyleFeatures mixed_features(std::span<const StyleFeatures> batch, RngStream& rng) {
  if (batch.empty()) throw ConfigError("mixed_features needs a non-empty batch");
  for (const auto& f : batch) require_matching(batch.front(), f);
  StyleFeatures out = batch.front();
  const std::size_t block = out.block_size();
  for (int l = 0; l < out.levels; ++l) {
    const auto r = rng.uniform_index(batch.size());
    const auto src = batch[r].level_block(l);
    std::copy(src.begin(), src.end(), out.values.begin() + static_cast<std::ptrdiff_t>(l * block));
  }
  return out;
}

FeatureVariance feature_variance(std::span<const StyleFeatures> batch) {
  if (batch.size() < 2) throw ConfigError("feature variance needs a batch of at least 2");
  for (const auto& f : batch) require_matching(batch.front(), f);
  const std::size_t dim = batch.front().dim();
  const auto count = static_cast<double>(batch.size());
  std::vector<double> centre(dim, 0.0);
  for (const auto& f : batch) {
    for (std::size_t i = 0; i < dim; ++i) centre[i] += f.values[i];
  }
  for (double& c : centre) c /= count;

  FeatureVariance out;
  out.feature_grads.assign(batch.size(), std::vector<double>(dim, 0.0));
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = batch[b].values[i] - centre[i];
      total += d * d;
      out.feature_grads[b][i] = 2.0 * d / (count * static_cast<double>(dim));
    }
  }
  out.value = total / (count * static_cast<double>(dim));
  return out;
}

FeatureVarianceImages feature_variance_grad(std::span<const Image> batch, const PyramidConfig& cfg,
                                            std::span<const double> weights) {
  std::vector<StyleFeatures> feats;
  feats.reserve(batch.size());
  for (const auto& img : batch) feats.push_back(extract(img, cfg, weights));
  FeatureVariance v = feature_variance(feats);
  FeatureVarianceImages out;
  out.value = v.value;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out.grads.push_back(backprop_features(batch[b], cfg, weights, v.feature_grads[b]));
  }
  return out;
}

std::string features_csv_header(const StyleFeatures& f) {
  std::string out;
  for (int l = 0; l < f.levels; ++l) {
    for (const char* stat : {"mean", "std"}) {
      for (int c = 0; c < f.channels_per_level; ++c) {
        if (!out.empty()) out += ',';
        out += "l" + std::to_string(l) + "_c" + std::to_string(c) + "_" + stat;
      }
    }
  }
  return out;
}

std::string features_csv_row(const StyleFeatures& f) {
  std::string out;
  char buf[40];
  for (std::size_t i = 0; i < f.dim(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", f.values[i]);
    if (i > 0) out += ',';
    out += buf;
  }
  return out;
}

}  // namespace styleguide
