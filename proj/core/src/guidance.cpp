#include "styleguide/guidance.hpp"

#include <algorithm>
#include <cmath>

#include "styleguide/errors.hpp"
#include "styleguide/parallel.hpp"

namespace styleguide {

const char* to_string(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::None:
      return "none";
    case GuidanceMode::Supervised:
      return "supervised";
    case GuidanceMode::Contrastive:
      return "contrastive";
    case GuidanceMode::Synonymous:
      return "synonymous";
  }
  return "none";
}

const char* to_string(Distance metric) { return metric == Distance::MAE ? "mae" : "mse"; }

const char* to_string(GuidancePair pair) { return pair == GuidancePair::X0Hat ? "x0hat" : "xt"; }

GuidanceMode parse_guidance_mode(const std::string& s) {
  if (s == "none") return GuidanceMode::None;
  if (s == "supervised") return GuidanceMode::Supervised;
  if (s == "contrastive") return GuidanceMode::Contrastive;
  if (s == "synonymous") return GuidanceMode::Synonymous;
  throw ConfigError("unknown guidance mode '" + s + "' (expected none|supervised|contrastive|synonymous)");
}

Distance parse_distance(const std::string& s) {
  if (s == "mae" || s == "MAE") return Distance::MAE;
  if (s == "mse" || s == "MSE") return Distance::MSE;
  throw ConfigError("unknown distance '" + s + "' (expected mae|mse)");
}

GuidancePair parse_guidance_pair(const std::string& s) {
  if (s == "x0hat") return GuidancePair::X0Hat;
  if (s == "xt") return GuidancePair::Xt;
  throw ConfigError("unknown guidance pair '" + s + "' (expected x0hat|xt)");
}

void validate(const GuidanceConfig& config) {
  if (!(config.base_scale >= 0.0) || !std::isfinite(config.base_scale)) {
    throw ConfigError("base scale s0 must be finite and non-negative");
  }
  if (!(config.content_anchor_weight >= 0.0)) throw ConfigError("content anchor weight must be non-negative");
  if (config.content_anchor_weight > 0.0 && config.mode != GuidanceMode::Contrastive) {
    throw ConfigError("content anchor weight only applies to contrastive guidance");
  }
  if (config.min_step < 1) throw ConfigError("guidance min_step must be at least 1");
  if (config.pyramid.levels < 1) throw ConfigError("pyramid needs at least one level");
  if (config.weights.size() != static_cast<std::size_t>(config.pyramid.levels)) {
    throw ConfigError("guidance weights must have one entry per pyramid level (" +
                      std::to_string(config.pyramid.levels) + ")");
  }
  for (double w : config.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("guidance weights must be finite and non-negative");
  }
}

double effective_scale(const GuidanceConfig& config, int t, const NoiseSchedule& sched) {
  require_step(sched, t);
  if (!config.adaptive_scale) return config.base_scale;
  double var = sched.posterior_var(t);
  if (!(var > 0.0)) var = sched.beta(1);
  return config.base_scale / std::sqrt(var);
}

double x0_chain_factor(const GuidanceConfig& config, int t, const NoiseSchedule& sched, const DenoiserModel& model) {
  if (config.grad_through_eps) {
    const std::optional<double> jac = model.x0_jacobian(t, sched);
    if (!jac) throw ConfigError("grad_through_eps needs a denoiser with an exact Jacobian");
    return *jac;
  }
  return 1.0 / std::sqrt(sched.alpha_bar(t));
}

namespace {

bool guidance_active(const GuidanceConfig& config, int t) { return t >= config.min_step; }

std::vector<Image> copy_means(std::span<const StepOutput> steps) {
  std::vector<Image> means;
  means.reserve(steps.size());
  for (const auto& s : steps) means.push_back(s.mean);
  return means;
}

void check_gradient(const Image& g, int t, std::size_t chain) {
  if (!g.all_finite()) throw DivergedChainError(t, static_cast<int>(chain), "non-finite guidance gradient");
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<Image> x0_batch(std::span<const StepOutput> steps) {
  std::vector<Image> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.x0_hat);
  return out;
}

void require_batch(std::span<const StepOutput> steps, std::span<const Image> x_t) {
  if (steps.size() != x_t.size()) throw DimensionError("step outputs and x_t batch differ in size");
}

// Gradient of the squared error between the anchor-level identity-channel means of x and of twin.
Image anchor_grad(const Image& x, const Image& twin, const PyramidConfig& cfg) {
  const std::vector<double> ones = equal_weights(cfg.levels);
  const StyleFeatures fx = extract(x, cfg, ones);
  const StyleFeatures ft = extract(twin, cfg, ones);
  const int level = std::min(3, cfg.levels - 1);
  std::vector<double> g(fx.dim(), 0.0);
  const int colors = x.channels();
  for (int c = 0; c < colors; ++c) {
    const std::size_t i = fx.mean_index(level, c);
    g[i] = 2.0 * (fx.values[i] - ft.values[i]) / colors;
  }
  return backprop_features(x, cfg, ones, g);
}

}  // namespace

PerturbResult supervised_perturb(std::span<const StepOutput> steps, std::span<const Image> x_t, int t,
                                 const NoiseSchedule& sched, const DenoiserModel& model, const GuidanceConfig& config,
                                 const StyleFeatures& reference) {
  require_batch(steps, x_t);
  PerturbResult out{copy_means(steps), {}};
  if (!guidance_active(config, t)) return out;
  const double scale = effective_scale(config, t, sched);
  const double factor = config.pair == GuidancePair::X0Hat ? x0_chain_factor(config, t, sched, model) : 1.0;
  std::vector<double> distances(steps.size());
  std::vector<double> norms(steps.size());
  parallel_for(steps.size(), config.threads, [&](std::size_t b) {
    const Image& z = config.pair == GuidancePair::X0Hat ? steps[b].x0_hat : x_t[b];
    const StyleFeatures f = extract(z, config.pyramid, config.weights);
    distances[b] = style_distance(f, reference, config.distance);
    const Image g = scaled(
        backprop_features(z, config.pyramid, config.weights, style_distance_feature_grad(f, reference, config.distance)),
        factor);
    check_gradient(g, t, b);
    norms[b] = l2_norm(g);
    add_scaled_inplace(out.means[b], g, -scale * steps[b].variance);
  });
  out.telemetry = {mean_of(distances), mean_of(norms), scale};
  return out;
}

PerturbResult contrastive_perturb(std::span<const StepOutput> steps, std::span<const Image> x_t, int t,
                                  const NoiseSchedule& sched, const DenoiserModel& model, const GuidanceConfig& config,
                                  std::span<const Image> twin_x0_hat) {
  require_batch(steps, x_t);
  if (steps.size() < 2) throw ConfigError("contrastive guidance needs a batch of at least 2");
  PerturbResult out{copy_means(steps), {}};
  if (!guidance_active(config, t)) return out;
  const bool anchored = config.content_anchor_weight > 0.0;
  if (anchored && twin_x0_hat.size() != steps.size()) {
    throw ConfigError("content anchor needs one twin chain per guided chain");
  }
  const double scale = effective_scale(config, t, sched);
  const double factor = x0_chain_factor(config, t, sched, model);
  const std::vector<Image> x0 = x0_batch(steps);

  std::vector<StyleFeatures> feats(x0.size());
  parallel_for(x0.size(), config.threads,
               [&](std::size_t b) { feats[b] = extract(x0[b], config.pyramid, config.weights); });
  const FeatureVariance var = feature_variance(feats);

  std::vector<double> norms(steps.size());
  parallel_for(steps.size(), config.threads, [&](std::size_t b) {
    Image g = scaled(backprop_features(x0[b], config.pyramid, config.weights, var.feature_grads[b]), factor);
    if (anchored) {
      add_scaled_inplace(g, anchor_grad(x0[b], twin_x0_hat[b], config.pyramid), -config.content_anchor_weight * factor);
    }
    check_gradient(g, t, b);
    norms[b] = l2_norm(g);
    add_scaled_inplace(out.means[b], g, scale * steps[b].variance);
  });
  out.telemetry = {var.value, mean_of(norms), scale};
  return out;
}

PerturbResult synonymous_perturb(std::span<const StepOutput> steps, std::span<const Image> x_t, int t,
                                 const NoiseSchedule& sched, const DenoiserModel& model, const GuidanceConfig& config,
                                 RngStream& mixing_rng) {
  require_batch(steps, x_t);
  if (steps.size() < 2) throw ConfigError("synonymous guidance needs a batch of at least 2");
  PerturbResult out{copy_means(steps), {}};
  if (!guidance_active(config, t)) return out;
  const double scale = effective_scale(config, t, sched);
  const double factor = x0_chain_factor(config, t, sched, model);
  const std::vector<Image> x0 = x0_batch(steps);

  std::vector<StyleFeatures> feats(x0.size());
  parallel_for(x0.size(), config.threads,
               [&](std::size_t b) { feats[b] = extract(x0[b], config.pyramid, config.weights); });
  const StyleFeatures target = mixed_features(feats, mixing_rng);

  std::vector<double> distances(steps.size());
  std::vector<double> norms(steps.size());
  parallel_for(steps.size(), config.threads, [&](std::size_t b) {
    distances[b] = style_distance(feats[b], target, config.distance);
    const Image g = scaled(backprop_features(x0[b], config.pyramid, config.weights,
                                             style_distance_feature_grad(feats[b], target, config.distance)),
                           factor);
    check_gradient(g, t, b);
    norms[b] = l2_norm(g);
    add_scaled_inplace(out.means[b], g, -scale * steps[b].variance);
  });
  out.telemetry = {mean_of(distances), mean_of(norms), scale};
  return out;
}

GuidanceContext::GuidanceContext(GuidanceConfig config, std::optional<StyleFeatures> reference, RngStream mixing)
    : config_(std::move(config)), reference_(std::move(reference)), mixing_(mixing) {
  styleguide::validate(config_);
  if (config_.mode == GuidanceMode::Supervised) {
    if (!reference_) throw ConfigError("supervised guidance needs a style reference");
    if (reference_->levels != config_.pyramid.levels) {
      throw ConfigError("style reference was extracted with a different number of pyramid levels");
    }
  } else if (reference_) {
    throw ConfigError(std::string(to_string(config_.mode)) + " guidance does not take a style reference");
  }
}

void GuidanceContext::validate(int batch_size, const DenoiserModel& model) const {
  const bool self_mode = config_.mode == GuidanceMode::Contrastive || config_.mode == GuidanceMode::Synonymous;
  if (self_mode && batch_size < 2) {
    throw ConfigError(std::string(to_string(config_.mode)) +
                      " guidance needs a batch of at least 2 (feature variance is undefined for one chain)");
  }
  if (config_.grad_through_eps && config_.pair == GuidancePair::X0Hat && config_.mode != GuidanceMode::None &&
      !model.exact_jacobian()) {
    throw ConfigError("grad_through_eps needs a denoiser with an exact Jacobian");
  }
}

bool GuidanceContext::wants_twin_chains() const {
  return config_.mode == GuidanceMode::Contrastive && config_.content_anchor_weight > 0.0;
}

GuidanceTelemetry GuidanceContext::perturb(const GuidanceStepInput& in, std::vector<Image>& means) const {
  PerturbResult r;
  switch (config_.mode) {
    case GuidanceMode::None:
      return {};
    case GuidanceMode::Supervised:
      r = supervised_perturb(in.steps, in.x_t, in.t, *in.sched, *in.model, config_, *reference_);
      break;
    case GuidanceMode::Contrastive:
      r = contrastive_perturb(in.steps, in.x_t, in.t, *in.sched, *in.model, config_, in.twin_x0_hat);
      break;
    case GuidanceMode::Synonymous: {
      RngStream step_rng = mixing_.derive(static_cast<std::uint64_t>(in.t));
      r = synonymous_perturb(in.steps, in.x_t, in.t, *in.sched, *in.model, config_, step_rng);
      break;
    }
  }
  means = std::move(r.means);
  return r.telemetry;
}

}  // namespace styleguide
