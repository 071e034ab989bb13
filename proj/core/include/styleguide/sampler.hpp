#pragma once

#include <optional>
#include <span>
#include <vector>

#include "styleguide/image.hpp"
#include "styleguide/rng.hpp"
#include "styleguide/schedule.hpp"

namespace styleguide {

// Noise predictor eps_hat(x_t, t).
class DenoiserModel {
 public:
  virtual ~DenoiserModel() = default;

  virtual Image predict(const Image& x_t, int t, const NoiseSchedule& sched) const = 0;

  // Whether d x0_hat / d x_t is a known multiple of the identity.
  virtual bool exact_jacobian() const { return false; }

  // That multiple at step t; nullopt when exact_jacobian() is false.
  virtual std::optional<double> x0_jacobian(int /*t*/, const NoiseSchedule& /*sched*/) const { return std::nullopt; }
};

struct StepOutput {
  Image mean;
  double variance = 0.0;
  Image eps_hat;
  Image x0_hat;
};

StepOutput denoise_step(const DenoiserModel& model, const Image& x_t, int t, const NoiseSchedule& sched);

struct GuidanceTelemetry {
  double style_distance = 0.0;
  double grad_norm = 0.0;
  double scale = 0.0;
};

struct TelemetryRow {
  int step = 0;
  double style_distance = 0.0;
  double grad_norm = 0.0;
  double scale = 0.0;
};

struct GuidanceStepInput {
  int t = 0;
  const NoiseSchedule* sched = nullptr;
  const DenoiserModel* model = nullptr;
  std::span<const Image> x_t;
  std::span<const StepOutput> steps;
  // x0 estimates of the unguided twin chains; empty unless the hook asked for them.
  std::span<const Image> twin_x0_hat;
};

// Perturbs the batch of reverse-step means. Called once per step with the
// whole batch, so batch-coupled guidance sees every chain at the same step.
class GuidanceHook {
 public:
  virtual ~GuidanceHook() = default;

  // Throws ConfigError when the hook cannot run on this batch/model.
  virtual void validate(int batch_size, const DenoiserModel& model) const = 0;

  virtual bool wants_twin_chains() const { return false; }

  // Replaces `means` (initialized to the unperturbed means) with the guided means.
  virtual GuidanceTelemetry perturb(const GuidanceStepInput& in, std::vector<Image>& means) const = 0;
};

struct SampleOptions {
  int threads = 1;
  bool record_telemetry = false;
};

struct SampleResult {
  std::vector<Image> images;
  std::vector<TelemetryRow> telemetry;
};

inline constexpr double kDivergenceBound = 1e6;

// Ancestral sampling from t = T down to 1; the last step returns the mean.
// Chain b draws its initial noise from rng.derive(kChainInit, b) and its step-t
// noise from rng.derive(kChainStep, b).derive(t).
SampleResult sample(const DenoiserModel& model, const NoiseSchedule& sched, Shape shape, int batch_size,
                    const GuidanceHook* guidance, const RngStream& rng, const SampleOptions& options = {});

}  // namespace styleguide
