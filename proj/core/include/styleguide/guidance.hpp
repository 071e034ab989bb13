#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "styleguide/rng.hpp"
#include "styleguide/sampler.hpp"
#include "styleguide/schedule.hpp"
#include "styleguide/style.hpp"

namespace styleguide {

enum class GuidanceMode { None, Supervised, Contrastive, Synonymous };

// Which image the style gradient is taken at.
enum class GuidancePair { X0Hat, Xt };

struct GuidanceConfig {
  GuidanceMode mode = GuidanceMode::None;
  double base_scale = 0.0;
  bool adaptive_scale = true;
  Distance distance = Distance::MAE;
  GuidancePair pair = GuidancePair::X0Hat;
  std::vector<double> weights = equal_weights(4);
  // Differentiate through eps_hat(x_t) using the denoiser's exact Jacobian
  // instead of treating eps_hat as constant.
  bool grad_through_eps = false;
  double content_anchor_weight = 0.0;
  // Guidance is applied for steps t >= min_step.
  int min_step = 1;
  PyramidConfig pyramid{};
  int threads = 1;
};

const char* to_string(GuidanceMode mode);
const char* to_string(Distance metric);
const char* to_string(GuidancePair pair);
GuidanceMode parse_guidance_mode(const std::string& s);
Distance parse_distance(const std::string& s);
GuidancePair parse_guidance_pair(const std::string& s);

void validate(const GuidanceConfig& config);

// s_t = s0 / sqrt(posterior_var_t) when adaptive (falling back to sqrt(beta_1)
// where the posterior variance is zero), s0 otherwise.
double effective_scale(const GuidanceConfig& config, int t, const NoiseSchedule& sched);

// Factor mapping a gradient at x0_hat to a gradient at x_t.
double x0_chain_factor(const GuidanceConfig& config, int t, const NoiseSchedule& sched, const DenoiserModel& model);

struct PerturbResult {
  std::vector<Image> means;
  GuidanceTelemetry telemetry;
};

PerturbResult supervised_perturb(std::span<const StepOutput> steps, std::span<const Image> x_t, int t,
                                 const NoiseSchedule& sched, const DenoiserModel& model, const GuidanceConfig& config,
                                 const StyleFeatures& reference);

// twin_x0_hat is only read when content_anchor_weight > 0.
PerturbResult contrastive_perturb(std::span<const StepOutput> steps, std::span<const Image> x_t, int t,
                                  const NoiseSchedule& sched, const DenoiserModel& model, const GuidanceConfig& config,
                                  std::span<const Image> twin_x0_hat = {});

// mixing_rng supplies the per-level draws for the mixed target of this step.
PerturbResult synonymous_perturb(std::span<const StepOutput> steps, std::span<const Image> x_t, int t,
                                 const NoiseSchedule& sched, const DenoiserModel& model, const GuidanceConfig& config,
                                 RngStream& mixing_rng);

class GuidanceContext final : public GuidanceHook {
 public:
  // reference must be present for supervised mode and absent otherwise.
  GuidanceContext(GuidanceConfig config, std::optional<StyleFeatures> reference, RngStream mixing);

  void validate(int batch_size, const DenoiserModel& model) const override;
  bool wants_twin_chains() const override;
  GuidanceTelemetry perturb(const GuidanceStepInput& in, std::vector<Image>& means) const override;

  const GuidanceConfig& config() const noexcept { return config_; }
  const std::optional<StyleFeatures>& reference() const noexcept { return reference_; }

 private:
  GuidanceConfig config_;
  std::optional<StyleFeatures> reference_;
  RngStream mixing_;
};

}  // namespace styleguide
