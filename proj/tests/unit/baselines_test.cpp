#include <doctest.h>

#include <cmath>
#include <vector>

#include "styleguide/baselines.hpp"
#include "styleguide/denoisers.hpp"
#include "styleguide/errors.hpp"
#include "styleguide/metrics.hpp"
#include "styleguide/sampler.hpp"
#include "styleguide/templates.hpp"
#include "test_support.hpp"

using namespace styleguide;

namespace {

// First chain of an unguided batch from the default style population.
std::vector<Image> unguided_corpus(int count) {
  const Shape shape{16, 16, 3};
  const GmmDenoiser model(default_style_population(shape, 1));
  std::vector<Image> out;
  for (int seed = 0; seed < count; ++seed) {
    out.push_back(sample(model, default_schedule(), shape, 1, nullptr, RngStream(static_cast<std::uint64_t>(seed), 0))
                      .images.front());
  }
  return out;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("iterative transfer keeps content that already has the style") {
  const Image content = testing::random_image(Shape{16, 16, 3}, 1);
  const StyleFeatures ref = extract(content, PyramidConfig{}, equal_weights(4));
  for (double gamma : {0.0, 1.0, 10.0}) {
    TransferConfig cfg;
    cfg.content_weight = gamma;
    cfg.iterations = 20;
    const TransferResult r = iterative_transfer(content, ref, cfg);
    CHECK(r.image == content);
    CHECK(r.loss_trace.size() == 21);
  }
}

TEST_CASE("iterative transfer on a constant toy converges to the reference mean") {
  const Shape shape{2, 2, 1};
  const PyramidConfig pyr{1, 1e-8};
  const StyleFeatures ref = extract(Image(shape, -0.5), pyr, equal_weights(1));
  TransferConfig cfg;
  cfg.content_weight = 0.0;
  cfg.pyramid = pyr;
  const TransferResult r = iterative_transfer(Image(shape, 0.3), ref, cfg);
  CHECK(style_loss(r.image, ref, pyr) < 1e-4);
  for (std::size_t i = 0; i < r.image.size(); ++i) CHECK(r.image[i] == doctest::Approx(-0.5).epsilon(1e-3));
  for (std::size_t i = 1; i < r.loss_trace.size(); ++i) CHECK(r.loss_trace[i] <= r.loss_trace[i - 1]);
}

TEST_CASE("iterative transfer descends monotonically on seeded inputs") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image content = seed == 0 ? render_template("checkerboard", Shape{16, 16, 3}, 2)
                                    : testing::random_image(Shape{16, 16, 3}, 40 + seed);
    const StyleFeatures ref =
        extract(render_template(template_names()[seed % template_names().size()], Shape{16, 16, 3}, seed),
                PyramidConfig{}, equal_weights(4));
    const TransferResult r = iterative_transfer(content, ref, TransferConfig{});
    // Once converged the trace sits at a fixed point and wobbles in the last bits.
    for (std::size_t i = 1; i < r.loss_trace.size(); ++i) CHECK(r.loss_trace[i] <= r.loss_trace[i - 1] * (1.0 + 1e-12));
    CHECK(r.loss_trace.back() < r.loss_trace.front());
  }
}

TEST_CASE("iterative transfer validates its settings") {
  const Image content(16, 16, 3);
  const StyleFeatures ref = extract(content, PyramidConfig{}, equal_weights(4));
  TransferConfig cfg;
  cfg.iterations = -1;
  CHECK_THROWS_AS(iterative_transfer(content, ref, cfg), ConfigError);
  cfg = TransferConfig{};
  cfg.step_size = 0.0;
  CHECK_THROWS_AS(iterative_transfer(content, ref, cfg), ConfigError);
  cfg = TransferConfig{};
  cfg.step_size = 1e6;
  const StyleFeatures far = extract(render_template("diagonal_waves", Shape{16, 16, 3}, 0), PyramidConfig{}, equal_weights(4));
  CHECK_THROWS_AS(iterative_transfer(testing::random_image(Shape{16, 16, 3}, 3), far, cfg), DivergedError);
  CHECK_THROWS_AS(iterative_transfer(Image(16, 16, 1), ref, TransferConfig{}), DimensionError);
}

TEST_CASE("moment matching is the identity on its own statistics") {
  const Image content = testing::random_image(Shape{16, 16, 3}, 4);
  const StyleFeatures stats = extract(content, PyramidConfig{}, equal_weights(4));
  CHECK(testing::max_abs_diff(moment_match_transfer(content, stats), content) < 1e-12);
}

TEST_CASE("moment matching passes constant channels through") {
  Image content = testing::random_image(Shape{16, 16, 3}, 5);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) content.at(y, x, 1) = 0.25;
  }
  const StyleFeatures stats = extract(testing::random_image(Shape{16, 16, 3}, 6), PyramidConfig{}, equal_weights(4));
  const Image out = moment_match_transfer(content, stats);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) CHECK(out.at(y, x, 1) == 0.25);
  }
}

TEST_CASE("moment matching reproduces the level-zero statistics") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image content = testing::random_image(Shape{16, 16, 3}, 10 + seed);
    const StyleFeatures ref = extract(render_template("diagonal_waves", Shape{16, 16, 3}, seed), PyramidConfig{}, equal_weights(4));
    const StyleFeatures got = extract(moment_match_transfer(content, ref), PyramidConfig{}, equal_weights(4));
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(got.values[got.mean_index(0, c)] - ref.values[ref.mean_index(0, c)]) < 1e-10);
      CHECK(std::abs(got.values[got.std_index(0, c)] - ref.values[ref.std_index(0, c)]) < 1e-10);
    }
  }
}

TEST_CASE("moment matching honours level-zero weights and channel counts") {
  const Image content = testing::random_image(Shape{16, 16, 3}, 20);
  const Image style = render_template("diagonal_waves", Shape{16, 16, 3}, 0);
  const StyleFeatures weighted = extract(style, PyramidConfig{}, std::vector<double>{2.0, 1.0, 1.0, 1.0});
  const StyleFeatures plain = extract(style, PyramidConfig{}, equal_weights(4));
  CHECK(testing::max_abs_diff(moment_match_transfer(content, weighted), moment_match_transfer(content, plain)) < 1e-12);
  CHECK_THROWS_AS(moment_match_transfer(Image(16, 16, 1), plain), DimensionError);
}

TEST_CASE("unweighted iterative transfer beats moment matching on sampled content") {
  const StyleFeatures ref = extract(render_template("diagonal_waves", Shape{16, 16, 3}, 0), PyramidConfig{}, equal_weights(4));
  TransferConfig cfg;
  cfg.content_weight = 0.0;
  cfg.iterations = 1000;
  for (const Image& content : unguided_corpus(4)) {
    const double iterative = style_loss(iterative_transfer(content, ref, cfg).image, ref);
    const double matched = style_loss(moment_match_transfer(content, ref), ref);
    CHECK(iterative < matched);
  }
}

}
