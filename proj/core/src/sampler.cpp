#include "styleguide/sampler.hpp"

#include <cmath>
#include <string>

#include "styleguide/errors.hpp"
#include "styleguide/parallel.hpp"

namespace styleguide {
namespace {

void check_chain(const Image& x, int t, int chain) {
  if (!x.all_finite()) throw DivergedChainError(t, chain, "non-finite value");
  if (x.max_abs() > kDivergenceBound) throw DivergedChainError(t, chain, "magnitude above 1e6");
}

// One reverse transition for every chain given the (possibly guided) means.
void advance(std::vector<Image>& xs, const std::vector<Image>& means, int t, const NoiseSchedule& sched,
             const RngStream& rng, int threads) {
  const double stddev = std::sqrt(sched.posterior_var(t));
  parallel_for(xs.size(), threads, [&](std::size_t b) {
    if (t > 1) {
      RngStream noise = rng.derive(stream_tag::kChainStep, b).derive(static_cast<std::uint64_t>(t));
      xs[b] = add_scaled(means[b], gaussian_noise(means[b].shape(), noise), stddev);
    } else {
      xs[b] = means[b];
    }
    check_chain(xs[b], t, static_cast<int>(b));
  });
}

}  // namespace

StepOutput denoise_step(const DenoiserModel& model, const Image& x_t, int t, const NoiseSchedule& sched) {
  require_step(sched, t);
  StepOutput out;
  out.eps_hat = model.predict(x_t, t, sched);
  require_same_shape(x_t, out.eps_hat, "denoiser output");
  out.x0_hat = estimate_x0(x_t, out.eps_hat, t, sched);
  out.mean = posterior_mean(x_t, out.eps_hat, t, sched);
  out.variance = sched.posterior_var(t);
  return out;
}

SampleResult sample(const DenoiserModel& model, const NoiseSchedule& sched, Shape shape, int batch_size,
                    const GuidanceHook* guidance, const RngStream& rng, const SampleOptions& options) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (guidance != nullptr) guidance->validate(batch_size, model);
  const bool twins = guidance != nullptr && guidance->wants_twin_chains();
  const auto batch = static_cast<std::size_t>(batch_size);

  std::vector<Image> xs(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    RngStream init = rng.derive(stream_tag::kChainInit, b);
    xs[b] = gaussian_noise(shape, init);
  }
  std::vector<Image> twin_xs = twins ? xs : std::vector<Image>{};

  SampleResult result;
  std::vector<StepOutput> steps(batch);
  std::vector<StepOutput> twin_steps(twins ? batch : 0);
  std::vector<Image> means(batch);
  std::vector<Image> twin_means(twins ? batch : 0);
  std::vector<Image> twin_x0(twins ? batch : 0);

  for (int t = sched.steps; t >= 1; --t) {
    parallel_for(batch, options.threads, [&](std::size_t b) {
      steps[b] = denoise_step(model, xs[b], t, sched);
      means[b] = steps[b].mean;
      if (twins) {
        twin_steps[b] = denoise_step(model, twin_xs[b], t, sched);
        twin_means[b] = twin_steps[b].mean;
        twin_x0[b] = twin_steps[b].x0_hat;
      }
    });

    if (guidance != nullptr) {
      GuidanceStepInput in;
      in.t = t;
      in.sched = &sched;
      in.model = &model;
      in.x_t = xs;
      in.steps = steps;
      in.twin_x0_hat = twin_x0;
      const GuidanceTelemetry tel = guidance->perturb(in, means);
      if (options.record_telemetry) result.telemetry.push_back({t, tel.style_distance, tel.grad_norm, tel.scale});
    } else if (options.record_telemetry) {
      result.telemetry.push_back({t, 0.0, 0.0, 0.0});
    }

    advance(xs, means, t, sched, rng, options.threads);
    if (twins) advance(twin_xs, twin_means, t, sched, rng, options.threads);
  }
  result.images = std::move(xs);
  return result;
}

}  // namespace styleguide
