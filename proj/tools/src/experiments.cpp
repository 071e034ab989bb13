#include "styleguide/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "styleguide/errors.hpp"
#include "styleguide/parallel.hpp"
#include "styleguide/ppm.hpp"
#include "styleguide/templates.hpp"

namespace styleguide {

Setup make_setup(const ExperimentConfig& config) {
  validate(config);
  Setup setup;
  setup.config = config;
  setup.schedule = make_schedule(config.schedule.steps, config.schedule.beta_start, config.schedule.beta_end);
  if (config.data.kind == "gaussian") {
    setup.law = GaussianData{render_template(config.data.template_name, config.image, config.data.seed), config.data.sigma};
  } else {
    setup.law = default_style_population(config.image, config.data.seed, config.data.sigma);
  }
  validate(setup.law);

  if (!config.data.denoiser.empty()) {
    std::ifstream in(config.data.denoiser);
    if (!in) throw IoError("cannot open denoiser file " + config.data.denoiser);
    auto model = std::make_shared<AffineDenoiser>(read_affine(in));
    if (model->bias().shape() != config.image) {
      throw DimensionError("denoiser " + config.data.denoiser + " was trained at a different image size");
    }
    if (model->steps() != setup.schedule.steps) {
      throw ConfigError("denoiser " + config.data.denoiser + " was trained for " + std::to_string(model->steps()) +
                        " steps, schedule has " + std::to_string(setup.schedule.steps));
    }
    setup.model = std::move(model);
  } else if (const auto* g = std::get_if<GaussianData>(&setup.law)) {
    setup.model = std::make_shared<GaussianDenoiser>(*g);
  } else {
    setup.model = std::make_shared<GmmDenoiser>(std::get<GmmData>(setup.law));
  }

  if (config.reference.path.empty()) {
    setup.reference_image = render_template(config.reference.template_name, config.image, config.reference.seed);
  } else {
    setup.reference_image = read_ppm(config.reference.path);
    if (config.image.channels != 3) throw DimensionError("PPM references need 3-channel images");
  }
  setup.reference = extract(setup.reference_image, config.guidance.pyramid, equal_weights(config.guidance.pyramid.levels));
  return setup;
}

StyleFeatures guidance_reference(const Setup& setup, const GuidanceConfig& guidance) {
  return extract(setup.reference_image, guidance.pyramid, guidance.weights);
}

RngStream chain_stream(std::uint64_t seed) { return RngStream(seed, 0); }

RngStream mixing_stream(std::uint64_t seed) { return RngStream(seed, stream_tag::kMixing); }

BatchRun run_batch(const Setup& setup, const GuidanceConfig& guidance, std::uint64_t seed, bool record_telemetry) {
  BatchRun run;
  run.seed = seed;
  std::optional<GuidanceContext> ctx;
  if (guidance.mode == GuidanceMode::Supervised) {
    ctx.emplace(guidance, guidance_reference(setup, guidance), mixing_stream(seed));
  } else if (guidance.mode != GuidanceMode::None) {
    ctx.emplace(guidance, std::nullopt, mixing_stream(seed));
  }
  SampleOptions options;
  options.threads = guidance.threads;
  options.record_telemetry = record_telemetry;
  try {
    SampleResult result = sample(*setup.model, setup.schedule, setup.config.image, setup.config.batch_size,
                                 ctx ? &*ctx : nullptr, chain_stream(seed), options);
    run.images = std::move(result.images);
    run.telemetry = std::move(result.telemetry);
  } catch (const DivergedError& e) {
    run.diverged = true;
    run.message = e.what();
    return run;
  }
  run.report = evaluate_batch(run.images, &setup.reference, setup.law, setup.config.guidance.pyramid);
  return run;
}

namespace {

double noise_content(const Setup& setup, const std::vector<std::uint64_t>& seeds) {
  double total = 0.0;
  for (std::uint64_t seed : seeds) {
    RngStream rng(seed, stream_tag::kNoiseProbe);
    total += content_score(gaussian_noise(setup.config.image, rng), setup.law);
  }
  return total / static_cast<double>(seeds.size());
}

GuidanceConfig supervised(const Setup& setup, double s0) {
  GuidanceConfig g = setup.config.guidance;
  g.mode = GuidanceMode::Supervised;
  g.content_anchor_weight = 0.0;
  g.base_scale = s0;
  g.threads = 1;
  return g;
}

SweepRow sweep_row(const BatchRun& run, double s0) {
  SweepRow row;
  row.s0 = s0;
  row.seed = run.seed;
  row.diverged = run.diverged;
  if (!run.diverged) {
    row.style_loss = run.report.style_loss;
    row.content_score = run.report.content_score;
    row.batch_diversity = run.report.batch_diversity;
  }
  return row;
}

// Runs every (config, seed) pair, in parallel, returning rows in job order.
std::vector<SweepRow> run_grid(const Setup& setup, const std::vector<GuidanceConfig>& configs,
                               const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows(configs.size() * seeds.size());
  parallel_for(rows.size(), setup.config.threads, [&](std::size_t job) {
    const GuidanceConfig& g = configs[job / seeds.size()];
    rows[job] = sweep_row(run_batch(setup, g, seeds[job % seeds.size()]), g.base_scale);
  });
  return rows;
}

struct Means {
  double style = 0.0;
  double content = 0.0;
  bool diverged = false;
};

Means mean_of(std::span<const SweepRow> rows) {
  Means m;
  int n = 0;
  for (const auto& r : rows) {
    if (r.diverged) {
      m.diverged = true;
      continue;
    }
    m.style += r.style_loss;
    m.content += r.content_score;
    ++n;
  }
  if (n > 0) {
    m.style /= n;
    m.content /= n;
  }
  return m;
}

}  // namespace

double noise_content_score(const Setup& setup) { return noise_content(setup, setup.config.seeds); }

std::vector<double> default_s0_grid() { return {0.0, 100.0, 300.0, 1000.0, 3000.0, 10000.0, 30000.0, 100000.0}; }

std::vector<SweepRow> run_sweep(const Setup& setup, const std::vector<double>& s0_grid) {
  if (s0_grid.empty()) throw ConfigError("s0 grid is empty");
  std::vector<GuidanceConfig> configs;
  for (double s0 : s0_grid) {
    if (!(s0 >= 0.0)) throw ConfigError("s0 values must be non-negative");
    configs.push_back(supervised(setup, s0));
  }
  return run_grid(setup, configs, setup.config.seeds);
}

std::vector<SweepPoint> summarize_sweep(const std::vector<SweepRow>& rows) {
  std::vector<SweepPoint> points;
  for (const auto& r : rows) {
    auto it = std::find_if(points.begin(), points.end(), [&](const SweepPoint& p) { return p.s0 == r.s0; });
    if (it == points.end()) {
      points.push_back({r.s0, 0.0, 0.0, 0, 0});
      it = points.end() - 1;
    }
    if (r.diverged) {
      ++it->diverged;
      continue;
    }
    it->style_loss += r.style_loss;
    it->content_score += r.content_score;
    ++it->runs;
  }
  for (auto& p : points) {
    if (p.runs > 0) {
      p.style_loss /= p.runs;
      p.content_score /= p.runs;
    }
  }
  return points;
}

double select_s0(const std::vector<SweepPoint>& points) {
  const SweepPoint* best = nullptr;
  for (const auto& p : points) {
    if (p.diverged > 0 || p.runs == 0) continue;
    if (best == nullptr || p.style_loss < best->style_loss) best = &p;
  }
  if (best == nullptr) throw DivergedError("every sweep point diverged");
  return best->s0;
}

AblationOptions default_ablation_options() {
  AblationOptions options;
  for (int k = 8; k <= 22; ++k) options.s0_grid.push_back(std::pow(10.0, k / 4.0));
  return options;
}

namespace {

std::vector<std::vector<double>> default_weight_candidates(int levels) {
  std::vector<std::vector<double>> out;
  auto normalized = [levels](std::vector<double> w) {
    double sum = 0.0;
    for (double x : w) sum += x;
    for (double& x : w) x *= levels / sum;
    return w;
  };
  for (int l = 0; l < levels; ++l) {
    std::vector<double> w(static_cast<std::size_t>(levels), 1.0);
    w[static_cast<std::size_t>(l)] = 2.0;
    out.push_back(normalized(w));
  }
  if (levels > 1) {
    std::vector<double> up(static_cast<std::size_t>(levels));
    std::vector<double> down(static_cast<std::size_t>(levels));
    for (int l = 0; l < levels; ++l) {
      up[static_cast<std::size_t>(l)] = l + 1.0;
      down[static_cast<std::size_t>(l)] = static_cast<double>(levels - l);
    }
    out.push_back(normalized(up));
    out.push_back(normalized(down));
  }
  return out;
}

}  // namespace

double overall_score(double style_loss, double content_score, const AblationResult& baseline) {
  const double content_gap = baseline.unguided_content_score - baseline.noise_content_score;
  if (!(baseline.unguided_style_loss > 0.0) || !(content_gap > 0.0)) {
    throw NumericGuardError("ablation baseline is degenerate (unguided style loss or content gap is not positive)");
  }
  return style_loss / baseline.unguided_style_loss + (baseline.unguided_content_score - content_score) / content_gap;
}

AblationResult run_ablation(const Setup& setup, const AblationOptions& options) {
  if (options.s0_grid.empty()) throw ConfigError("ablation s0 grid is empty");
  if (options.tuning_seeds.empty()) throw ConfigError("ablation needs tuning seeds");
  const int levels = setup.config.guidance.pyramid.levels;
  std::vector<std::vector<double>> candidates =
      options.weight_candidates.empty() ? default_weight_candidates(levels) : options.weight_candidates;
  for (const auto& w : candidates) {
    if (w.size() != static_cast<std::size_t>(levels)) throw ConfigError("weight candidate has the wrong length");
  }

  AblationResult result;
  {
    GuidanceConfig none = supervised(setup, 0.0);
    const auto rows = run_grid(setup, {none}, options.tuning_seeds);
    const Means m = mean_of(rows);
    result.unguided_style_loss = m.style;
    result.unguided_content_score = m.content;
    result.noise_content_score = noise_content(setup, options.tuning_seeds);
  }

  // Lowest overall score over the s0 grid on the tuning seeds; grid points where any chain diverged are skipped.
  auto retune = [&](GuidanceConfig g) {
    std::vector<GuidanceConfig> configs;
    for (double s0 : options.s0_grid) {
      g.base_scale = s0;
      configs.push_back(g);
    }
    const auto rows = run_grid(setup, configs, options.tuning_seeds);
    const std::size_t n = options.tuning_seeds.size();
    double best = std::numeric_limits<double>::infinity();
    double best_s0 = -1.0;
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const Means m = mean_of(std::span<const SweepRow>(rows).subspan(i * n, n));
      if (m.diverged) continue;
      const double score = overall_score(m.style, m.content, result);
      if (score < best) {
        best = score;
        best_s0 = configs[i].base_scale;
      }
    }
    if (best_s0 < 0.0) throw DivergedError("every retuning grid point diverged");
    g.base_scale = best_s0;
    return std::pair{g, best};
  };

  GuidanceConfig base = supervised(setup, 0.0);
  base.pair = GuidancePair::X0Hat;
  base.distance = Distance::MAE;
  base.adaptive_scale = true;

  AblationSetting optimal;
  optimal.tuning_score = std::numeric_limits<double>::infinity();
  for (const auto& w : candidates) {
    GuidanceConfig g = base;
    g.weights = w;
    auto [tuned, score] = retune(g);
    if (score < optimal.tuning_score) {
      optimal.guidance = tuned;
      optimal.tuning_score = score;
    }
  }
  optimal.id = 0;
  optimal.label = "optimal";
  result.settings.push_back(optimal);

  struct Variant {
    const char* label;
    void (*apply)(GuidanceConfig&);
  };
  const Variant variants[] = {
      {"xt_pair", [](GuidanceConfig& g) { g.pair = GuidancePair::Xt; }},
      {"fixed_scale", [](GuidanceConfig& g) { g.adaptive_scale = false; }},
      {"equal_weights", [](GuidanceConfig& g) { g.weights = equal_weights(static_cast<int>(g.weights.size())); }},
      {"mse", [](GuidanceConfig& g) { g.distance = Distance::MSE; }},
  };
  for (const auto& v : variants) {
    AblationSetting s;
    s.id = static_cast<int>(result.settings.size());
    s.label = v.label;
    GuidanceConfig g = optimal.guidance;
    v.apply(g);
    std::tie(s.guidance, s.tuning_score) = retune(g);
    result.settings.push_back(s);
  }

  std::vector<GuidanceConfig> configs;
  for (const auto& s : result.settings) configs.push_back(s.guidance);
  const auto rows = run_grid(setup, configs, setup.config.seeds);
  const std::size_t n = setup.config.seeds.size();
  for (std::size_t i = 0; i < result.settings.size(); ++i) {
    auto& s = result.settings[i];
    s.rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(i * n), rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    const Means m = mean_of(s.rows);
    s.style_loss = m.style;
    s.content_score = m.content;
  }
  return result;
}

TwoStepResult run_two_step(const Setup& setup, double s0, const TransferConfig& transfer) {
  TwoStepResult result;
  result.s0 = s0 >= 0.0 ? s0 : select_s0(summarize_sweep(run_sweep(setup, default_s0_grid())));
  const GuidanceConfig guided = supervised(setup, result.s0);
  GuidanceConfig none = guided;
  none.mode = GuidanceMode::None;
  none.base_scale = 0.0;
  TransferConfig tc = transfer;
  tc.pyramid = setup.config.guidance.pyramid;

  const auto& seeds = setup.config.seeds;
  result.rows.resize(seeds.size());
  std::vector<std::vector<Image>> examples(seeds.size());
  parallel_for(seeds.size(), setup.config.threads, [&](std::size_t i) {
    TwoStepRow& row = result.rows[i];
    row.seed = seeds[i];
    const BatchRun g = run_batch(setup, guided, seeds[i]);
    const BatchRun u = run_batch(setup, none, seeds[i]);
    if (g.diverged || u.diverged) {
      row.diverged = true;
      return;
    }
    row.guided = g.report.style_loss;
    row.unguided = u.report.style_loss;
    const auto count = static_cast<double>(u.images.size());
    for (std::size_t b = 0; b < u.images.size(); ++b) {
      const Image iterative = iterative_transfer(u.images[b], setup.reference, tc).image;
      const Image matched = moment_match_transfer(u.images[b], setup.reference, tc.pyramid);
      row.iterative += style_loss(iterative, setup.reference, tc.pyramid) / count;
      row.moment_match += style_loss(matched, setup.reference, tc.pyramid) / count;
      if (i == 0 && b == 0) examples[i] = {u.images[b], g.images[b], iterative, matched};
    }
  });
  result.example = std::move(examples.front());
  return result;
}

DiversityResult run_diversity(const Setup& setup, double contrastive_s0, double synonymous_s0) {
  if (setup.config.batch_size < 2) throw ConfigError("diversity runs need a batch of at least 2");
  GuidanceConfig base = setup.config.guidance;
  base.threads = 1;
  GuidanceConfig none = base;
  none.mode = GuidanceMode::None;
  none.content_anchor_weight = 0.0;
  GuidanceConfig contrastive = base;
  contrastive.mode = GuidanceMode::Contrastive;
  contrastive.base_scale = contrastive_s0;
  GuidanceConfig synonymous = base;
  synonymous.mode = GuidanceMode::Synonymous;
  synonymous.base_scale = synonymous_s0;
  synonymous.content_anchor_weight = 0.0;
  const GuidanceConfig* modes[] = {&none, &contrastive, &synonymous};

  const auto& seeds = setup.config.seeds;
  const std::size_t jobs = 3 * seeds.size();
  std::vector<BatchRun> runs(jobs);
  parallel_for(jobs, setup.config.threads,
               [&](std::size_t j) { runs[j] = run_batch(setup, *modes[j / seeds.size()], seeds[j % seeds.size()]); });

  DiversityResult result;
  const PyramidConfig& pyramid = setup.config.guidance.pyramid;
  const std::vector<double> ones = equal_weights(pyramid.levels);
  std::vector<StyleFeatures> all;
  for (std::size_t j = 0; j < jobs; ++j) {
    const GuidanceConfig& g = *modes[j / seeds.size()];
    DiversityRow row;
    row.mode = to_string(g.mode);
    row.seed = runs[j].seed;
    row.s0 = g.base_scale;
    row.diverged = runs[j].diverged;
    if (!row.diverged) {
      std::vector<StyleFeatures> feats;
      for (std::size_t b = 0; b < runs[j].images.size(); ++b) {
        feats.push_back(extract(runs[j].images[b], pyramid, ones));
        all.push_back(feats.back());
        result.embedding_ids.push_back(row.mode + "_" + std::to_string(row.seed) + "_" + std::to_string(b));
      }
      row.batch_diversity = runs[j].report.batch_diversity;
      row.feature_variance = feature_variance(feats).value;
      row.content_score = runs[j].report.content_score;
    }
    result.rows.push_back(row);
  }
  if (all.size() >= 2) result.embedding = pca_embed(all, 2);
  return result;
}

AffineTrainResult run_training(const Setup& setup, const AffineTrainConfig& train, std::uint64_t seed) {
  return train_affine(setup.law, setup.schedule, train, RngStream(seed, stream_tag::kTraining));
}

}  // namespace styleguide
