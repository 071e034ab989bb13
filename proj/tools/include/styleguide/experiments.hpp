#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "styleguide/baselines.hpp"
#include "styleguide/config.hpp"
#include "styleguide/denoisers.hpp"
#include "styleguide/metrics.hpp"
#include "styleguide/sampler.hpp"

namespace styleguide {

// Everything a run needs that follows from an ExperimentConfig.
struct Setup {
  ExperimentConfig config;
  NoiseSchedule schedule;
  DataLaw law;
  std::shared_ptr<const DenoiserModel> model;
  Image reference_image;
  StyleFeatures reference;  // equal weights; the assessment target
};

Setup make_setup(const ExperimentConfig& config);

// Reference features under the guidance weights of `guidance`.
StyleFeatures guidance_reference(const Setup& setup, const GuidanceConfig& guidance);

// Chains use RngStream(seed, 0); the mixing draws use RngStream(seed, kMixing).
RngStream chain_stream(std::uint64_t seed);
RngStream mixing_stream(std::uint64_t seed);

struct BatchRun {
  std::uint64_t seed = 0;
  std::vector<Image> images;
  MetricReport report;
  std::vector<TelemetryRow> telemetry;
  bool diverged = false;
  std::string message;  // divergence diagnostic
};

// One sampled batch. Divergence is caught and recorded, other errors propagate.
BatchRun run_batch(const Setup& setup, const GuidanceConfig& guidance, std::uint64_t seed,
                   bool record_telemetry = false);

// Mean per-pixel content score of pure standard-normal images (one per seed).
double noise_content_score(const Setup& setup);

struct SweepRow {
  double s0 = 0.0;
  std::uint64_t seed = 0;
  double style_loss = 0.0;
  double content_score = 0.0;
  double batch_diversity = 0.0;
  bool diverged = false;
};

struct SweepPoint {
  double s0 = 0.0;
  double style_loss = 0.0;  // mean over non-diverged seeds
  double content_score = 0.0;
  int runs = 0;
  int diverged = 0;
};

std::vector<double> default_s0_grid();

// Supervised sweep over grid x seeds (guidance settings other than s0 come from setup.config).
std::vector<SweepRow> run_sweep(const Setup& setup, const std::vector<double>& s0_grid);
std::vector<SweepPoint> summarize_sweep(const std::vector<SweepRow>& rows);
// Grid value with the lowest mean style loss among points where no seed diverged.
double select_s0(const std::vector<SweepPoint>& points);

struct AblationOptions {
  std::vector<double> s0_grid;  // coarse retuning grid
  std::vector<std::uint64_t> tuning_seeds{100, 101, 102, 103};
  std::vector<std::vector<double>> weight_candidates;  // searched for the varying-weights rows
};

AblationOptions default_ablation_options();

struct AblationSetting {
  int id = 0;
  std::string label;
  GuidanceConfig guidance;
  double tuning_score = 0.0;
  std::vector<SweepRow> rows;  // evaluation seeds at the retuned s0
  double style_loss = 0.0;
  double content_score = 0.0;
};

struct AblationResult {
  double unguided_style_loss = 0.0;  // on the tuning seeds
  double unguided_content_score = 0.0;
  double noise_content_score = 0.0;
  std::vector<AblationSetting> settings;  // #0..#4
};

// Overall quality used to retune s0: style loss relative to unguided plus the
// content drop relative to the unguided-to-noise gap. Lower is better.
double overall_score(double style_loss, double content_score, const AblationResult& baseline);

AblationResult run_ablation(const Setup& setup, const AblationOptions& options);

struct TwoStepRow {
  std::uint64_t seed = 0;
  double guided = 0.0;
  double iterative = 0.0;
  double moment_match = 0.0;
  double unguided = 0.0;
  bool diverged = false;
};

struct TwoStepResult {
  double s0 = 0.0;
  std::vector<TwoStepRow> rows;
  std::vector<Image> example;  // first seed, first chain: unguided, guided, iterative, moment-matched
};

// s0 < 0 selects it with a sweep over default_s0_grid().
TwoStepResult run_two_step(const Setup& setup, double s0, const TransferConfig& transfer);

struct DiversityRow {
  std::string mode;
  std::uint64_t seed = 0;
  double s0 = 0.0;
  double batch_diversity = 0.0;
  double feature_variance = 0.0;
  double content_score = 0.0;
  bool diverged = false;
};

struct DiversityResult {
  std::vector<DiversityRow> rows;
  std::vector<std::string> embedding_ids;  // mode_seed_chain
  PcaEmbedding embedding;
};

inline constexpr double kDefaultSelfScale = 1000.0;

// Unguided, contrastive and synonymous batches on every seed with shared chain noise.
DiversityResult run_diversity(const Setup& setup, double contrastive_s0, double synonymous_s0);

AffineTrainResult run_training(const Setup& setup, const AffineTrainConfig& train, std::uint64_t seed);

}  // namespace styleguide
