#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "styleguide/denoisers.hpp"
#include "styleguide/errors.hpp"
#include "styleguide/guidance.hpp"
#include "styleguide/sampler.hpp"
#include "styleguide/schedule.hpp"
#include "styleguide/templates.hpp"
#include "test_support.hpp"

using namespace styleguide;

namespace {

// Returns zeros except at one step, where it returns NaN.
class PoisonedDenoiser final : public DenoiserModel {
 public:
  explicit PoisonedDenoiser(int bad_step) : bad_step_(bad_step) {}
  Image predict(const Image& x_t, int t, const NoiseSchedule&) const override {
    return Image(x_t.shape(), t == bad_step_ ? std::numeric_limits<double>::quiet_NaN() : 0.0);
  }

 private:
  int bad_step_;
};

GaussianData checker_law(Shape shape, double sigma0 = 0.1) {
  return GaussianData{render_template("checkerboard", shape, 3), sigma0};
}

}  // namespace

TEST_SUITE("diffusion") {

TEST_CASE("constant beta schedule gives the direct product") {
  const NoiseSchedule s = make_schedule(3, 0.1, 0.1);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(s.alpha_bar(2) == doctest::Approx(0.81).epsilon(1e-14));
  CHECK(s.alpha_bar(3) == doctest::Approx(0.729).epsilon(1e-14));
}

TEST_CASE("single-step schedule has zero posterior variance") {
  const NoiseSchedule s = make_schedule(1, 0.1, 0.1);
  CHECK(s.posterior_var(1) == 0.0);
}

TEST_CASE("default schedule nearly destroys the signal") {
  const NoiseSchedule s = default_schedule();
  CHECK(s.steps == 100);
  CHECK(s.beta(1) == doctest::Approx(0.001));
  CHECK(s.beta(100) == doctest::Approx(0.2));
  CHECK(s.alpha_bar(100) < 1e-4);
}

TEST_CASE("schedule consistency holds for every constructed schedule") {
  const std::vector<std::array<double, 3>> cases{{100, 0.001, 0.2}, {1, 0.3, 0.3}, {7, 0.01, 0.5}, {1000, 1e-4, 0.02}};
  for (const auto& c : cases) {
    const NoiseSchedule s = make_schedule(static_cast<int>(c[0]), c[1], c[2]);
    for (int t = 1; t <= s.steps; ++t) {
      const double expected = s.alpha_bar(t - 1) * (1.0 - s.beta(t));
      CHECK(std::abs(s.alpha_bar(t) - expected) <= 1e-12 * expected);
      CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
      CHECK(s.posterior_var(t) <= s.beta(t));
      // The first step is noiseless, so only t >= 2 is strictly positive.
      if (t >= 2) CHECK(s.posterior_var(t) > 0.0);
    }
  }
}

TEST_CASE("schedule rejects out-of-range betas") {
  CHECK_THROWS_AS(make_schedule(0, 0.1, 0.1), ConfigError);
  CHECK_THROWS_AS(make_schedule(10, 0.0, 0.1), ConfigError);
  CHECK_THROWS_AS(make_schedule(10, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(make_schedule(10, 0.2, 0.1), ConfigError);
}

TEST_CASE("forward diffusion with zero noise scales x0") {
  const NoiseSchedule s = make_schedule(3, 0.1, 0.1);
  const Image x0 = testing::random_image(Shape{4, 4, 3}, 1);
  const Image xt = forward_diffuse_with_noise(x0, 2, s, Image(x0.shape()));
  for (std::size_t i = 0; i < x0.size(); ++i) CHECK(xt[i] == doctest::Approx(0.9 * x0[i]).epsilon(1e-14));
  RngStream rng(1, 0);
  CHECK_THROWS_AS(forward_diffuse(x0, 0, s, rng), IndexError);
  CHECK_THROWS_AS(forward_diffuse(x0, 4, s, rng), IndexError);
}

TEST_CASE("forward diffusion moments match the marginal") {
  const NoiseSchedule s = make_schedule(1, 0.36, 0.36);  // abar = 0.64
  const Image x0(Shape{100, 1000, 1}, 1.0);
  RngStream rng(11, 0);
  const Image xt = forward_diffuse(x0, 1, s, rng);
  const double mean = mean_value(xt);
  double var = 0.0;
  for (std::size_t i = 0; i < xt.size(); ++i) var += (xt[i] - mean) * (xt[i] - mean);
  var /= static_cast<double>(xt.size());
  CHECK(mean == doctest::Approx(0.8).epsilon(0.01));
  CHECK(var == doctest::Approx(0.36).epsilon(0.02));
}

TEST_CASE("forward diffusion at the last default step looks like standard noise") {
  const NoiseSchedule s = default_schedule();
  const Image x0(Shape{200, 200, 1}, 1.0);
  RngStream rng(12, 0);
  const Image xt = forward_diffuse(x0, 100, s, rng);
  const double mean = mean_value(xt);
  double var = 0.0;
  for (std::size_t i = 0; i < xt.size(); ++i) var += (xt[i] - mean) * (xt[i] - mean);
  var /= static_cast<double>(xt.size());
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("estimate_x0 inverts forward diffusion") {
  const NoiseSchedule s = default_schedule();
  const Image x0 = testing::random_image(Shape{8, 8, 3}, 2);
  RngStream rng(3, 0);
  for (int t : {1, 10, 50, 100}) {
    const Image eps = gaussian_noise(x0.shape(), rng);
    const Image xt = forward_diffuse_with_noise(x0, t, s, eps);
    CHECK(testing::max_abs_diff(estimate_x0(xt, eps, t, s), x0) < 1e-10);
  }
}

TEST_CASE("estimate_x0 examples") {
  const NoiseSchedule s = make_schedule(1, 0.36, 0.36);
  const Image est = estimate_x0(testing::single_pixel(0.5), testing::single_pixel(0.25), 1, s);
  CHECK(est[0] == doctest::Approx(0.4375).epsilon(1e-14));
  const Image zero_eps = estimate_x0(testing::single_pixel(0.5), testing::single_pixel(0.0), 1, s);
  CHECK(zero_eps[0] == doctest::Approx(0.5 / 0.8).epsilon(1e-14));
}

TEST_CASE("estimate_x0 guards a vanishing alpha_bar") {
  const NoiseSchedule s = make_schedule(2000, 0.5, 0.5);
  CHECK(s.alpha_bar(2000) < 1e-12);
  CHECK_THROWS_AS(estimate_x0(testing::single_pixel(0.5), testing::single_pixel(0.0), 2000, s), NumericGuardError);
}

TEST_CASE("posterior_mean examples") {
  const NoiseSchedule s = make_schedule(1, 0.1, 0.1);
  const Image mu = posterior_mean(testing::single_pixel(0.95), testing::single_pixel(0.3162), 1, s);
  CHECK(mu[0] == doctest::Approx(0.8960).epsilon(1e-4));
  const Image plain = posterior_mean(testing::single_pixel(0.95), testing::single_pixel(0.0), 1, s);
  CHECK(plain[0] == doctest::Approx(0.95 / std::sqrt(0.9)).epsilon(1e-14));
}

TEST_CASE("denoise_step output is self-consistent") {
  const NoiseSchedule s = default_schedule();
  const Shape shape{4, 4, 3};
  const GaussianDenoiser model(checker_law(shape));
  const Image xt = testing::random_image(shape, 5, 1.0);
  for (int t : {1, 2, 60}) {
    const StepOutput out = denoise_step(model, xt, t, s);
    CHECK(testing::max_abs_diff(out.x0_hat, estimate_x0(xt, out.eps_hat, t, s)) < 1e-12);
    CHECK(testing::max_abs_diff(out.mean, posterior_mean(xt, out.eps_hat, t, s)) < 1e-12);
    CHECK(out.variance == s.posterior_var(t));
    if (t >= 2) CHECK(out.variance > 0.0);
  }
}

// Exact variance left by the reverse chain for x0 ~ N(m, v): every step is affine in x_t
// with slope k_t, so var_{t-1} = k_t^2 var_t + noise_t starting from var_T = 1.
double reverse_chain_variance(const NoiseSchedule& s, double v) {
  double var = 1.0;
  for (int t = s.steps; t >= 1; --t) {
    const double abar = s.alpha_bar(t);
    const double abar_prev = s.alpha_bar(t - 1);
    const double shrink = std::sqrt(abar) * v / (abar * v + 1.0 - abar);
    const double from_x0 = std::sqrt(abar_prev) * s.beta(t) / (1.0 - abar);
    const double from_xt = std::sqrt(1.0 - s.beta(t)) * (1.0 - abar_prev) / (1.0 - abar);
    const double k = from_x0 * shrink + from_xt;
    var = k * k * var + (t > 1 ? s.beta(t) * (1.0 - abar_prev) / (1.0 - abar) : 0.0);
  }
  return var;
}

TEST_CASE("unguided sampling reproduces the moments of the reverse chain") {
  const NoiseSchedule s = default_schedule();
  const Shape shape{4, 4, 1};
  const GaussianData law = checker_law(shape);
  const GaussianDenoiser model(law);
  const double expected = reverse_chain_variance(s, 0.01);
  CHECK(expected == doctest::Approx(0.6414 * 0.01).epsilon(1e-3));
  const SampleResult r = sample(model, s, shape, 2000, nullptr, RngStream(7, 0));
  double pooled = 0.0;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    double mean = 0.0;
    for (const auto& img : r.images) mean += img[i];
    mean /= static_cast<double>(r.images.size());
    double var = 0.0;
    for (const auto& img : r.images) var += (img[i] - mean) * (img[i] - mean);
    var /= static_cast<double>(r.images.size() - 1);
    CHECK(std::abs(mean - law.mean[i]) < 0.05);
    // 5 standard errors of a 2000-sample variance.
    CHECK(std::abs(var / expected - 1.0) < 5.0 * std::sqrt(2.0 / 1999.0));
    pooled += var / static_cast<double>(shape.size());
  }
  CHECK(std::abs(pooled / expected - 1.0) < 5.0 * std::sqrt(2.0 / (1999.0 * 16.0)));
}

TEST_CASE("the last step returns the mean without noise") {
  const NoiseSchedule s = make_schedule(1, 0.1, 0.1);
  const Shape shape{2, 2, 1};
  const GaussianDenoiser model(GaussianData{Image(shape, 0.2), 0.5});
  const RngStream rng(4, 0);
  const SampleResult r = sample(model, s, shape, 1, nullptr, rng);
  RngStream init = rng.derive(stream_tag::kChainInit, 0);
  const Image x1 = gaussian_noise(shape, init);
  const StepOutput step = denoise_step(model, x1, 1, s);
  CHECK(r.images[0] == step.mean);
}

TEST_CASE("sampling is deterministic regardless of thread count") {
  const NoiseSchedule s = make_schedule(20, 0.01, 0.3);
  const Shape shape{8, 8, 3};
  const GmmDenoiser model(default_style_population(shape, 1));
  GuidanceConfig cfg;
  cfg.mode = GuidanceMode::Contrastive;
  cfg.base_scale = 100.0;
  cfg.pyramid.levels = 3;
  cfg.weights = equal_weights(3);
  const GuidanceContext ctx(cfg, std::nullopt, RngStream(1, stream_tag::kMixing));
  const SampleResult one = sample(model, s, shape, 5, &ctx, RngStream(3, 0), SampleOptions{1, false});
  const SampleResult three = sample(model, s, shape, 5, &ctx, RngStream(3, 0), SampleOptions{3, false});
  CHECK(one.images == three.images);
  const SampleResult again = sample(model, s, shape, 5, &ctx, RngStream(3, 0), SampleOptions{1, false});
  CHECK(one.images == again.images);
}

TEST_CASE("zero-scale supervised guidance is bit-identical to unguided sampling") {
  const NoiseSchedule s = make_schedule(20, 0.01, 0.3);
  const Shape shape{8, 8, 3};
  const GmmDenoiser model(default_style_population(shape, 1));
  GuidanceConfig cfg;
  cfg.mode = GuidanceMode::Supervised;
  cfg.base_scale = 0.0;
  cfg.pyramid.levels = 3;
  cfg.weights = equal_weights(3);
  const StyleFeatures ref = extract(render_template("diagonal_waves", shape, 0), cfg.pyramid, cfg.weights);
  const GuidanceContext ctx(cfg, ref, RngStream(1, stream_tag::kMixing));
  const SampleResult plain = sample(model, s, shape, 3, nullptr, RngStream(9, 0));
  const SampleResult guided = sample(model, s, shape, 3, &ctx, RngStream(9, 0));
  CHECK(plain.images == guided.images);
}

TEST_CASE("contrastive guidance needs at least two chains") {
  const NoiseSchedule s = make_schedule(5, 0.01, 0.3);
  const Shape shape{8, 8, 3};
  const GaussianDenoiser model(checker_law(shape));
  GuidanceConfig cfg;
  cfg.mode = GuidanceMode::Contrastive;
  cfg.base_scale = 10.0;
  cfg.pyramid.levels = 3;
  cfg.weights = equal_weights(3);
  const GuidanceContext ctx(cfg, std::nullopt, RngStream(1, stream_tag::kMixing));
  CHECK_THROWS_AS(sample(model, s, shape, 1, &ctx, RngStream(1, 0)), ConfigError);
}

TEST_CASE("a non-finite chain aborts naming the step") {
  const NoiseSchedule s = make_schedule(10, 0.01, 0.3);
  const PoisonedDenoiser model(6);
  try {
    sample(model, s, Shape{2, 2, 1}, 2, nullptr, RngStream(1, 0));
    FAIL("expected divergence");
  } catch (const DivergedChainError& e) {
    CHECK(e.step() == 6);
    CHECK(std::string(e.what()).find("step 6") != std::string::npos);
  }
}

TEST_CASE("telemetry has one row per step when requested") {
  const NoiseSchedule s = make_schedule(12, 0.01, 0.3);
  const Shape shape{8, 8, 3};
  const GaussianDenoiser model(checker_law(shape));
  GuidanceConfig cfg;
  cfg.mode = GuidanceMode::Supervised;
  cfg.base_scale = 50.0;
  cfg.pyramid.levels = 3;
  cfg.weights = equal_weights(3);
  const StyleFeatures ref = extract(render_template("diagonal_waves", shape, 0), cfg.pyramid, cfg.weights);
  const GuidanceContext ctx(cfg, ref, RngStream(1, stream_tag::kMixing));
  const SampleResult r = sample(model, s, shape, 2, &ctx, RngStream(1, 0), SampleOptions{1, true});
  REQUIRE(r.telemetry.size() == 12);
  CHECK(r.telemetry.front().step == 12);
  CHECK(r.telemetry.back().step == 1);
  for (const auto& row : r.telemetry) {
    CHECK(row.scale > 0.0);
    CHECK(row.style_distance > 0.0);
  }
}

}
