#include "styleguide/schedule.hpp"

#include <cmath>
#include <string>

#include "styleguide/errors.hpp"

namespace styleguide {

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("schedule needs at least one step, got " + std::to_string(steps));
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ConfigError("schedule betas must satisfy 0 < beta_start <= beta_end < 1, got [" +
                      std::to_string(beta_start) + ", " + std::to_string(beta_end) + "]");
  }
  NoiseSchedule s;
  s.steps = steps;
  const auto n = static_cast<std::size_t>(steps) + 1;
  s.betas.assign(n, 0.0);
  s.alpha_bars.assign(n, 1.0);
  s.posterior_vars.assign(n, 0.0);
  for (int t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
    const auto i = static_cast<std::size_t>(t);
    s.betas[i] = beta_start + frac * (beta_end - beta_start);
    s.alpha_bars[i] = s.alpha_bars[i - 1] * (1.0 - s.betas[i]);
    s.posterior_vars[i] = s.betas[i] * (1.0 - s.alpha_bars[i - 1]) / (1.0 - s.alpha_bars[i]);
  }
  return s;
}

void require_step(const NoiseSchedule& sched, int t) {
  if (t < 1 || t > sched.steps) {
    throw IndexError("step " + std::to_string(t) + " outside [1, " + std::to_string(sched.steps) + "]");
  }
}

Image forward_diffuse_with_noise(const Image& x0, int t, const NoiseSchedule& sched, const Image& eps) {
  require_step(sched, t);
  require_same_shape(x0, eps, "forward_diffuse");
  const double abar = sched.alpha_bar(t);
  Image out = scaled(x0, std::sqrt(abar));
  add_scaled_inplace(out, eps, std::sqrt(1.0 - abar));
  return out;
}

Image forward_diffuse(const Image& x0, int t, const NoiseSchedule& sched, RngStream& rng) {
  require_step(sched, t);
  return forward_diffuse_with_noise(x0, t, sched, gaussian_noise(x0.shape(), rng));
}

Image estimate_x0(const Image& x_t, const Image& eps_hat, int t, const NoiseSchedule& sched) {
  require_step(sched, t);
  require_same_shape(x_t, eps_hat, "estimate_x0");
  const double abar = sched.alpha_bar(t);
  if (abar < 1e-12) {
    throw NumericGuardError("alpha_bar at step " + std::to_string(t) + " is below 1e-12; x0 estimate undefined");
  }
  Image out = add_scaled(x_t, eps_hat, -std::sqrt(1.0 - abar));
  for (double& v : out.data()) v /= std::sqrt(abar);
  return out;
}

Image posterior_mean(const Image& x_t, const Image& eps_hat, int t, const NoiseSchedule& sched) {
  require_step(sched, t);
  require_same_shape(x_t, eps_hat, "posterior_mean");
  const double beta = sched.beta(t);
  Image out = add_scaled(x_t, eps_hat, -beta / std::sqrt(1.0 - sched.alpha_bar(t)));
  for (double& v : out.data()) v /= std::sqrt(1.0 - beta);
  return out;
}

}  // namespace styleguide
