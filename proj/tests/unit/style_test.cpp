#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "styleguide/errors.hpp"
#include "styleguide/style.hpp"
#include "test_support.hpp"

using namespace styleguide;

namespace {

StyleFeatures features_from(std::vector<double> values, int levels, int channels_per_level) {
  StyleFeatures f;
  f.levels = levels;
  f.channels_per_level = channels_per_level;
  f.weights = equal_weights(levels);
  f.values = std::move(values);
  return f;
}

const PyramidConfig kSmall{3, 1e-8};

}  // namespace

TEST_SUITE("style") {

TEST_CASE("feature vector layout") {
  const Image img = testing::random_image(Shape{16, 16, 3}, 1);
  const StyleFeatures f = extract(img, PyramidConfig{}, equal_weights(4));
  CHECK(f.dim() == 72);
  CHECK(f.levels == 4);
  CHECK(f.channels_per_level == 9);
  CHECK(f.mean_index(1, 2) == 20);
  CHECK(f.std_index(1, 2) == 29);
}

TEST_CASE("constant image features") {
  const Image img(16, 16, 3, 0.4);
  const StyleFeatures f = extract(img, PyramidConfig{}, equal_weights(4));
  for (int l = 0; l < 4; ++l) {
    for (int c = 0; c < 9; ++c) {
      CHECK(f.values[f.mean_index(l, c)] == doctest::Approx(c < 3 ? 0.4 : 0.0).epsilon(1e-14));
      CHECK(f.values[f.std_index(l, c)] == doctest::Approx(1e-4).epsilon(1e-6));
    }
  }
}

TEST_CASE("two-by-two level-zero statistics") {
  const Image img(Shape{2, 2, 1}, std::vector<double>{0, 0, 1, 1});
  const StyleFeatures f = extract(img, PyramidConfig{1, 1e-8}, equal_weights(1));
  CHECK(f.values[f.mean_index(0, 0)] == doctest::Approx(0.5));
  CHECK(f.values[f.std_index(0, 0)] == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("level weights scale their block") {
  const Image img = testing::random_image(Shape{16, 16, 3}, 2);
  const StyleFeatures plain = extract(img, PyramidConfig{}, equal_weights(4));
  const StyleFeatures weighted = extract(img, PyramidConfig{}, std::vector<double>{1, 2, 1, 0.5});
  for (std::size_t i = 0; i < plain.dim(); ++i) {
    const double w = std::vector<double>{1, 2, 1, 0.5}[i / plain.block_size()];
    CHECK(weighted.values[i] == doctest::Approx(w * plain.values[i]).epsilon(1e-15));
  }
}

TEST_CASE("extract matches an independent recomputation") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image img = testing::random_image(Shape{16, 16, 3}, seed);
    const std::vector<double> w{0.5, 1.5, 1.0, 2.0};
    const StyleFeatures f = extract(img, PyramidConfig{}, w);
    const std::vector<double> ref = testing::reference_features(img, 4, w);
    REQUIRE(ref.size() == f.dim());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(f.values[i] - ref[i]) < 1e-12);
  }
}

TEST_CASE("extract rejects images too small for the pyramid") {
  CHECK_THROWS_AS(extract(Image(8, 8, 3), PyramidConfig{}, equal_weights(4)), DimensionError);
  CHECK_THROWS_AS(extract(Image(16, 8, 3), PyramidConfig{}, equal_weights(4)), DimensionError);
  CHECK_NOTHROW(extract(Image(8, 8, 3), kSmall, equal_weights(3)));
  CHECK_THROWS_AS(extract(Image(16, 16, 3), PyramidConfig{}, equal_weights(3)), ConfigError);
}

TEST_CASE("style distance examples") {
  const StyleFeatures a = features_from({0.1, -0.2, 0.3, 0.4, 0.5, 0.6}, 1, 3);
  CHECK(style_distance(a, a, Distance::MAE) == 0.0);
  CHECK(style_distance(a, a, Distance::MSE) == 0.0);
  StyleFeatures b = a;
  for (double& v : b.values) v += 0.25;
  CHECK(style_distance(a, b, Distance::MAE) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(style_distance(a, b, Distance::MSE) == doctest::Approx(0.0625).epsilon(1e-14));
  CHECK_THROWS_AS(style_distance(a, features_from({1, 2}, 1, 1), Distance::MAE), DimensionError);
}

TEST_CASE("style distance on seeded images matches a direct recomputation") {
  const Image x = testing::random_image(Shape{16, 16, 3}, 21);
  const Image y = testing::random_image(Shape{16, 16, 3}, 22);
  const auto w = equal_weights(4);
  const std::vector<double> fx = testing::reference_features(x, 4, w);
  const std::vector<double> fy = testing::reference_features(y, 4, w);
  double mae = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    mae += std::abs(fx[i] - fy[i]);
    mse += (fx[i] - fy[i]) * (fx[i] - fy[i]);
  }
  const StyleFeatures a = extract(x, PyramidConfig{}, w);
  const StyleFeatures b = extract(y, PyramidConfig{}, w);
  CHECK(std::abs(style_distance(a, b, Distance::MAE) - mae / 72.0) < 1e-12);
  CHECK(std::abs(style_distance(a, b, Distance::MSE) - mse / 72.0) < 1e-12);
}

TEST_CASE("style distance is a pseudometric") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = extract(testing::random_image(Shape{8, 8, 3}, seed), kSmall, equal_weights(3));
    const auto b = extract(testing::random_image(Shape{8, 8, 3}, seed + 100), kSmall, equal_weights(3));
    for (Distance m : {Distance::MAE, Distance::MSE}) {
      CHECK(style_distance(a, b, m) >= 0.0);
      CHECK(style_distance(a, b, m) == style_distance(b, a, m));
      CHECK(style_distance(a, a, m) == 0.0);
    }
  }
}

TEST_CASE("level-zero identity statistics ignore pixel order") {
  const Image img = testing::random_image(Shape{8, 8, 3}, 3);
  std::vector<int> order(64);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(3, 3);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);
  Image shuffled(img.shape());
  for (int p = 0; p < 64; ++p) {
    for (int c = 0; c < 3; ++c) shuffled.at(p / 8, p % 8, c) = img.at(order[p] / 8, order[p] % 8, c);
  }
  const auto a = extract(img, kSmall, equal_weights(3));
  const auto b = extract(shuffled, kSmall, equal_weights(3));
  for (int c = 0; c < 3; ++c) {
    CHECK(a.values[a.mean_index(0, c)] == doctest::Approx(b.values[b.mean_index(0, c)]).epsilon(1e-14));
    CHECK(a.values[a.std_index(0, c)] == doctest::Approx(b.values[b.std_index(0, c)]).epsilon(1e-14));
  }
}

TEST_CASE("style gradient vanishes at the reference") {
  const Image img = testing::random_image(Shape{8, 8, 3}, 4);
  const auto ref = extract(img, kSmall, equal_weights(3));
  for (Distance m : {Distance::MAE, Distance::MSE}) {
    CHECK(style_distance_grad(img, ref, kSmall, equal_weights(3), m).max_abs() == 0.0);
  }
}

TEST_CASE("style gradient matches central finite differences") {
  const std::vector<double> weights{1.0, 0.5, 2.0};
  for (Distance m : {Distance::MAE, Distance::MSE}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Image x = testing::random_image(Shape{8, 8, 3}, 200 + seed);
      const auto ref = extract(testing::random_image(Shape{8, 8, 3}, 300 + seed, 0.8), kSmall, weights);
      const Image analytic = style_distance_grad(x, ref, kSmall, weights, m);
      const Image numeric = testing::numeric_gradient(
          x, [&](const Image& p) { return style_distance(extract(p, kSmall, weights), ref, m); });
      CHECK(testing::relative_error(analytic.data(), numeric.data()) < 1e-4);
    }
  }
}

TEST_CASE("mixed features copy whole blocks") {
  std::vector<StyleFeatures> batch;
  for (int b = 0; b < 4; ++b) batch.push_back(extract(testing::random_image(Shape{8, 8, 3}, 40 + b), kSmall, equal_weights(3)));
  RngStream rng(1, stream_tag::kMixing);
  for (int draw = 0; draw < 50; ++draw) {
    const StyleFeatures m = mixed_features(batch, rng);
    for (int l = 0; l < 3; ++l) {
      const auto block = m.level_block(l);
      bool found = false;
      for (const auto& f : batch) found = found || std::equal(block.begin(), block.end(), f.level_block(l).begin());
      CHECK(found);
    }
  }
}

TEST_CASE("mixed features of identical or single members") {
  const auto f = extract(testing::random_image(Shape{8, 8, 3}, 7), kSmall, equal_weights(3));
  RngStream rng(2, 2);
  const std::vector<StyleFeatures> same{f, f, f};
  CHECK(mixed_features(same, rng).values == f.values);
  const std::vector<StyleFeatures> one{f};
  CHECK(mixed_features(one, rng).values == f.values);
  CHECK_THROWS_AS(mixed_features(std::span<const StyleFeatures>{}, rng), ConfigError);
}

TEST_CASE("mixed feature draws are uniform over the batch") {
  std::vector<StyleFeatures> batch;
  for (int b = 0; b < 6; ++b) batch.push_back(features_from({double(b), double(b)}, 1, 1));
  RngStream rng(8, stream_tag::kMixing);
  std::vector<double> counts(6, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[static_cast<std::size_t>(mixed_features(batch, rng).values[0])] += 1.0;
  for (double c : counts) CHECK(std::abs(c / draws - 1.0 / 6.0) < 0.01);
}

TEST_CASE("feature variance examples") {
  const auto f = extract(testing::random_image(Shape{8, 8, 3}, 9), kSmall, equal_weights(3));
  const std::vector<StyleFeatures> same{f, f};
  const FeatureVariance zero = feature_variance(same);
  CHECK(zero.value == 0.0);
  for (const auto& g : zero.feature_grads) {
    for (double v : g) CHECK(v == 0.0);
  }

  StyleFeatures g = f;
  g.values[5] += 0.3;
  const std::vector<StyleFeatures> pair{f, g};
  CHECK(feature_variance(pair).value == doctest::Approx(0.09 / (4.0 * f.dim())).epsilon(1e-12));
  CHECK_THROWS_AS(feature_variance(std::vector<StyleFeatures>{f}), ConfigError);
}

TEST_CASE("feature variance gradients match central finite differences") {
  const std::vector<double> weights{1.0, 0.5, 2.0};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<Image> batch;
    for (int b = 0; b < 3; ++b) batch.push_back(testing::random_image(Shape{8, 8, 3}, 500 + 10 * seed + b));
    const FeatureVarianceImages fv = feature_variance_grad(batch, kSmall, weights);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Image numeric = testing::numeric_gradient(batch[b], [&](const Image& p) {
        std::vector<StyleFeatures> feats;
        for (std::size_t k = 0; k < batch.size(); ++k) feats.push_back(extract(k == b ? p : batch[k], kSmall, weights));
        return feature_variance(feats).value;
      });
      CHECK(testing::relative_error(fv.grads[b].data(), numeric.data()) < 1e-4);
    }
  }
}

TEST_CASE("feature csv serialization") {
  const auto f = extract(testing::random_image(Shape{8, 8, 1}, 10), PyramidConfig{2, 1e-8}, equal_weights(2));
  const std::string header = features_csv_header(f);
  CHECK(header.rfind("l0_c0_mean,l0_c1_mean,l0_c2_mean,l0_c0_std", 0) == 0);
  CHECK(std::count(header.begin(), header.end(), ',') == static_cast<long>(f.dim()) - 1);
  const std::string row = features_csv_row(f);
  CHECK(std::count(row.begin(), row.end(), ',') == static_cast<long>(f.dim()) - 1);
  CHECK(std::stod(row.substr(0, row.find(','))) == f.values[0]);
}

}
