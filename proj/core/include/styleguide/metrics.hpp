#pragma once

#include <span>
#include <vector>

#include "styleguide/denoisers.hpp"
#include "styleguide/image.hpp"
#include "styleguide/style.hpp"

namespace styleguide {

// MSE style distance with equal level weights. y_features must carry equal
// weights; assessment never uses guidance weights.
double style_loss(const Image& x, const StyleFeatures& y_features, const PyramidConfig& pyramid = {});

// Log-density of x under the data law, divided by the pixel count.
double content_score(const Image& x, const DataLaw& data);

// Mean over unordered pairs of the equal-weight MSE style distance.
double batch_diversity(std::span<const Image> batch, const PyramidConfig& pyramid = {});

struct PcaEmbedding {
  std::vector<std::vector<double>> points;  // one row per sample
  std::vector<double> variances;            // projected (population) variance per axis, descending
  std::vector<std::vector<double>> axes;    // unit principal axes
};

// Power iteration with deflation from a fixed start vector. Each axis's
// largest-magnitude loading is made positive.
PcaEmbedding pca_embed(std::span<const StyleFeatures> features, int dims = 2);

struct MetricRow {
  int index = 0;
  double style_loss = 0.0;
  double content_score = 0.0;
};

struct MetricReport {
  double style_loss = 0.0;  // mean over samples; 0 when no reference
  double content_score = 0.0;
  double batch_diversity = 0.0;  // 0 for single-image batches
  std::vector<MetricRow> rows;
};

MetricReport evaluate_batch(std::span<const Image> batch, const StyleFeatures* reference, const DataLaw& data,
                            const PyramidConfig& pyramid = {});

}  // namespace styleguide
