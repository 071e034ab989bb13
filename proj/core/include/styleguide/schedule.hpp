#pragma once

#include <vector>

#include "styleguide/image.hpp"
#include "styleguide/rng.hpp"

namespace styleguide {

// Arrays are indexed by step t in [0, T]; entry 0 of betas/posterior_vars is
// unused (0) and alpha_bars[0] = 1.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> betas;
  std::vector<double> alpha_bars;
  std::vector<double> posterior_vars;

  double beta(int t) const { return betas.at(static_cast<std::size_t>(t)); }
  double alpha_bar(int t) const { return alpha_bars.at(static_cast<std::size_t>(t)); }
  double posterior_var(int t) const { return posterior_vars.at(static_cast<std::size_t>(t)); }
};

inline constexpr int kDefaultSteps = 100;
inline constexpr double kDefaultBetaStart = 0.001;
inline constexpr double kDefaultBetaEnd = 0.2;

// Linear betas from beta_start to beta_end inclusive (T = 1 uses beta_start).
NoiseSchedule make_schedule(int steps, double beta_start, double beta_end);
inline NoiseSchedule default_schedule() { return make_schedule(kDefaultSteps, kDefaultBetaStart, kDefaultBetaEnd); }

void require_step(const NoiseSchedule& sched, int t);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
Image forward_diffuse_with_noise(const Image& x0, int t, const NoiseSchedule& sched, const Image& eps);
Image forward_diffuse(const Image& x0, int t, const NoiseSchedule& sched, RngStream& rng);

// x0_hat = (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)
Image estimate_x0(const Image& x_t, const Image& eps_hat, int t, const NoiseSchedule& sched);

// mu = (x_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(1 - beta_t)
Image posterior_mean(const Image& x_t, const Image& eps_hat, int t, const NoiseSchedule& sched);

}  // namespace styleguide
