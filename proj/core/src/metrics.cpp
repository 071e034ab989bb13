#include "styleguide/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "styleguide/errors.hpp"

namespace styleguide {

double style_loss(const Image& x, const StyleFeatures& y_features, const PyramidConfig& pyramid) {
  for (double w : y_features.weights) {
    if (w != 1.0) throw ConfigError("style loss reference features must use equal level weights");
  }
  PyramidConfig cfg = pyramid;
  cfg.levels = y_features.levels;
  return style_distance(extract(x, cfg, equal_weights(cfg.levels)), y_features, Distance::MSE);
}

namespace {

double squared_distance(const Image& a, const Image& b) {
  require_same_shape(a, b, "content_score");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return sq;
}

double gaussian_log_density(const Image& x, const Image& mean, double sigma) {
  const auto dim = static_cast<double>(x.size());
  return -0.5 * dim * std::log(2.0 * std::numbers::pi * sigma * sigma) -
         squared_distance(x, mean) / (2.0 * sigma * sigma);
}

}  // namespace

double content_score(const Image& x, const DataLaw& data) {
  const auto dim = static_cast<double>(x.size());
  if (const auto* g = std::get_if<GaussianData>(&data)) return gaussian_log_density(x, g->mean, g->sigma0) / dim;
  const auto& comps = std::get<GmmData>(data).components;
  std::vector<double> logs;
  logs.reserve(comps.size());
  for (const auto& c : comps) logs.push_back(std::log(c.weight) + gaussian_log_density(x, c.mean, c.sigma));
  const double top = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (double l : logs) total += std::exp(l - top);
  return (top + std::log(total)) / dim;
}

double batch_diversity(std::span<const Image> batch, const PyramidConfig& pyramid) {
  if (batch.size() < 2) throw ConfigError("batch diversity needs at least 2 images");
  const std::vector<double> ones = equal_weights(pyramid.levels);
  std::vector<StyleFeatures> feats;
  feats.reserve(batch.size());
  for (const auto& img : batch) feats.push_back(extract(img, pyramid, ones));
  double total = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t j = i + 1; j < feats.size(); ++j) {
      total += style_distance(feats[i], feats[j], Distance::MSE);
      pairs += 1.0;
    }
  }
  return total / pairs;
}

PcaEmbedding pca_embed(std::span<const StyleFeatures> features, int dims) {
  if (dims < 1) throw ConfigError("embedding needs at least one dimension");
  if (features.size() < 2 || features.size() < static_cast<std::size_t>(dims)) {
    throw ConfigError("embedding needs at least max(2, dims) samples, got " + std::to_string(features.size()));
  }
  const std::size_t n = features.size();
  const std::size_t d = features.front().dim();
  for (const auto& f : features) {
    if (f.dim() != d) throw DimensionError("embedding inputs differ in feature dimension");
  }
  if (static_cast<std::size_t>(dims) > d) throw ConfigError("more embedding dimensions than features");

  std::vector<double> centre(d, 0.0);
  for (const auto& f : features) {
    for (std::size_t i = 0; i < d; ++i) centre[i] += f.values[i];
  }
  for (double& c : centre) c /= static_cast<double>(n);
  std::vector<std::vector<double>> centred(n, std::vector<double>(d));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < d; ++i) centred[s][i] = features[s].values[i] - centre[i];
  }
  std::vector<double> cov(d * d, 0.0);
  for (const auto& row : centred) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += row[i] * row[j];
    }
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov[i * d + i];
  for (double& c : cov) c /= static_cast<double>(n);
  trace /= static_cast<double>(n);

  auto orthogonalize = [](std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
    for (const auto& u : basis) {
      double p = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) p += v[i] * u[i];
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * u[i];
    }
  };
  auto normalize = [](std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& x : v) x /= norm;
    }
    return norm;
  };

  PcaEmbedding out;
  for (int k = 0; k < dims; ++k) {
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 + 0.5 * std::cos(0.7 * static_cast<double>(i) + k);
    orthogonalize(v, out.axes);
    normalize(v);
    std::vector<double> w(d);
    for (int iter = 0; iter < 100000; ++iter) {
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += cov[i * d + j] * v[j];
        w[i] = s;
      }
      orthogonalize(w, out.axes);
      const double norm = normalize(w);
      if (norm <= 1e-15 * std::max(trace, 1e-300)) break;  // remaining spectrum is numerically zero
      double change = 0.0;
      for (std::size_t i = 0; i < d; ++i) change = std::max(change, std::abs(w[i] - v[i]));
      v = w;
      if (change < 1e-14) break;
    }
    const auto top = std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*top < 0.0) {
      for (double& x : v) x = -x;
    }
    out.axes.push_back(v);
  }

  out.points.assign(n, std::vector<double>(static_cast<std::size_t>(dims), 0.0));
  out.variances.assign(static_cast<std::size_t>(dims), 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(dims); ++k) {
      double p = 0.0;
      for (std::size_t i = 0; i < d; ++i) p += centred[s][i] * out.axes[k][i];
      out.points[s][k] = p;
      out.variances[k] += p * p / static_cast<double>(n);
    }
  }
  return out;
}

MetricReport evaluate_batch(std::span<const Image> batch, const StyleFeatures* reference, const DataLaw& data,
                            const PyramidConfig& pyramid) {
  MetricReport report;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    MetricRow row;
    row.index = static_cast<int>(i);
    row.style_loss = reference != nullptr ? style_loss(batch[i], *reference, pyramid) : 0.0;
    row.content_score = content_score(batch[i], data);
    report.style_loss += row.style_loss;
    report.content_score += row.content_score;
    report.rows.push_back(row);
  }
  if (!batch.empty()) {
    report.style_loss /= static_cast<double>(batch.size());
    report.content_score /= static_cast<double>(batch.size());
  }
  if (batch.size() >= 2) report.batch_diversity = batch_diversity(batch, pyramid);
  return report;
}

}  // namespace styleguide
