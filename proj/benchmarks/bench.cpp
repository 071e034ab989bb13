#include <benchmark/benchmark.h>

#include <vector>

#include "styleguide/denoisers.hpp"
#include "styleguide/guidance.hpp"
#include "styleguide/sampler.hpp"
#include "styleguide/style.hpp"
#include "styleguide/templates.hpp"

using namespace styleguide;

namespace {

const Shape kShape{16, 16, 3};

Image noise_image(std::uint64_t seed) {
  RngStream rng(seed, 0);
  return gaussian_noise(kShape, rng);
}

void BM_Extract(benchmark::State& state) {
  const Image x = noise_image(1);
  const auto w = equal_weights(4);
  for (auto _ : state) benchmark::DoNotOptimize(extract(x, PyramidConfig{}, w));
}
BENCHMARK(BM_Extract);

void BM_StyleDistanceGrad(benchmark::State& state) {
  const Image x = noise_image(2);
  const auto w = equal_weights(4);
  const StyleFeatures ref = extract(render_template("diagonal_waves", kShape, 0), PyramidConfig{}, w);
  for (auto _ : state) benchmark::DoNotOptimize(style_distance_grad(x, ref, PyramidConfig{}, w, Distance::MAE));
}
BENCHMARK(BM_StyleDistanceGrad);

void BM_GmmPredict(benchmark::State& state) {
  const GmmDenoiser model(default_style_population(kShape, 1));
  const Image x = noise_image(3);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x, 50, default_schedule()));
}
BENCHMARK(BM_GmmPredict);

// Full reverse chain for a batch of 8, unguided and supervised.
void BM_Sample(benchmark::State& state) {
  const GmmDenoiser model(default_style_population(kShape, 1));
  const NoiseSchedule sched = default_schedule();
  GuidanceConfig cfg;
  cfg.mode = state.range(0) == 0 ? GuidanceMode::None : GuidanceMode::Supervised;
  cfg.base_scale = 3000.0;
  const StyleFeatures ref = extract(render_template("diagonal_waves", kShape, 0), PyramidConfig{}, cfg.weights);
  const GuidanceContext ctx(cfg, cfg.mode == GuidanceMode::None ? std::nullopt : std::optional(ref), RngStream(0, 1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample(model, sched, kShape, 8, state.range(0) == 0 ? nullptr : &ctx, RngStream(0, 0)));
  }
}
BENCHMARK(BM_Sample)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
