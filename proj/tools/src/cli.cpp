#include "styleguide/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "csv.hpp"
#include "styleguide/errors.hpp"
#include "styleguide/experiments.hpp"
#include "styleguide/manifest.hpp"
#include "styleguide/ppm.hpp"

namespace styleguide {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Flags shared by every subcommand. Values only apply when the flag was given.
struct CommonFlags {
  std::string config_path;
  std::string output;
  std::uint64_t seed = 0;
  std::string seeds;
  int batch = 0;
  int size = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  int steps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::string data;
  double sigma = 0.0;
  std::uint64_t data_seed = 0;
  std::string data_template;
  std::string denoiser;
  std::string reference;
  std::uint64_t reference_seed = 0;
  int threads = 1;
  std::string mode;
  bool adaptive = true;
  std::string distance;
  std::string pair;
  std::string weights;
  double gamma_c = 0.0;
  bool grad_through_eps = false;
  int min_step = 1;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "JSON config file or a manifest.json from an earlier run");
  sub->add_option("--output,-o", f.output, "Output directory");
  sub->add_option("--seed", f.seed, "Single seed");
  sub->add_option("--seeds", f.seeds, "Seed list, e.g. 0-19 or 1,5,9");
  sub->add_option("--batch", f.batch, "Batch size");
  sub->add_option("--size", f.size, "Square image size");
  sub->add_option("--height", f.height, "Image height");
  sub->add_option("--width", f.width, "Image width");
  sub->add_option("--channels", f.channels, "Image channels");
  sub->add_option("--steps", f.steps, "Diffusion steps T");
  sub->add_option("--beta-start", f.beta_start, "First beta");
  sub->add_option("--beta-end", f.beta_end, "Last beta");
  sub->add_option("--data", f.data, "Data law: gaussian | gmm");
  sub->add_option("--sigma", f.sigma, "Data law standard deviation");
  sub->add_option("--data-seed", f.data_seed, "Seed for the data law's template images");
  sub->add_option("--data-template", f.data_template, "Mean template of the gaussian data law");
  sub->add_option("--denoiser", f.denoiser, "Trained affine denoiser file");
  sub->add_option("--reference", f.reference, "Style reference: template name or .ppm path");
  sub->add_option("--reference-seed", f.reference_seed, "Seed for the reference template");
  sub->add_option("--threads", f.threads, "Worker threads");
  sub->add_option("--mode", f.mode, "Guidance: none | supervised | contrastive | synonymous");
  sub->add_flag("--adaptive,!--no-adaptive", f.adaptive, "Adaptive guidance scale");
  sub->add_option("--distance", f.distance, "Guidance style distance: mae | mse");
  sub->add_option("--pair", f.pair, "Guidance pair: x0hat | xt");
  sub->add_option("--weights", f.weights, "Guidance level weights, comma separated");
  sub->add_option("--gamma-c", f.gamma_c, "Content anchor weight (contrastive only)");
  sub->add_flag("--grad-through-eps", f.grad_through_eps, "Differentiate through the denoiser");
  sub->add_option("--min-step", f.min_step, "Apply guidance only for t >= min-step");
}

bool given(const CLI::App* sub, const char* name) { return sub->count(name) > 0; }

struct Loaded {
  ExperimentConfig config = default_experiment();
  json options = json::object();
};

Loaded load_config(const CLI::App* sub, const CommonFlags& f, const std::string& command) {
  Loaded loaded;
  if (given(sub, "--config")) {
    json j = read_json_file(f.config_path);
    if (j.contains("config") && j.contains("command")) {
      if (j.at("command") != command) {
        throw ConfigError("manifest " + f.config_path + " was written by '" + j.at("command").get<std::string>() +
                          "', not '" + command + "'");
      }
      if (j.contains("options")) loaded.options = j.at("options");
      j = j.at("config");
    }
    loaded.config = experiment_from_json(j);
  }
  ExperimentConfig& c = loaded.config;
  if (given(sub, "--output")) c.output_dir = f.output;
  if (given(sub, "--seed") && given(sub, "--seeds")) throw ConfigError("--seed and --seeds are mutually exclusive");
  if (given(sub, "--seed")) c.seeds = {f.seed};
  if (given(sub, "--seeds")) c.seeds = parse_seed_list(f.seeds);
  if (given(sub, "--batch")) c.batch_size = f.batch;
  if (given(sub, "--size")) c.image.height = c.image.width = f.size;
  if (given(sub, "--height")) c.image.height = f.height;
  if (given(sub, "--width")) c.image.width = f.width;
  if (given(sub, "--channels")) c.image.channels = f.channels;
  if (given(sub, "--steps")) c.schedule.steps = f.steps;
  if (given(sub, "--beta-start")) c.schedule.beta_start = f.beta_start;
  if (given(sub, "--beta-end")) c.schedule.beta_end = f.beta_end;
  if (given(sub, "--data")) c.data.kind = f.data;
  if (given(sub, "--sigma")) c.data.sigma = f.sigma;
  if (given(sub, "--data-seed")) c.data.seed = f.data_seed;
  if (given(sub, "--data-template")) c.data.template_name = f.data_template;
  if (given(sub, "--denoiser")) c.data.denoiser = f.denoiser;
  if (given(sub, "--reference")) {
    if (fs::path(f.reference).extension() == ".ppm") {
      c.reference.path = f.reference;
    } else {
      c.reference.path.clear();
      c.reference.template_name = f.reference;
    }
  }
  if (given(sub, "--reference-seed")) c.reference.seed = f.reference_seed;
  if (given(sub, "--threads")) c.threads = f.threads;
  GuidanceConfig& g = c.guidance;
  if (given(sub, "--mode")) g.mode = parse_guidance_mode(f.mode);
  if (given(sub, "--adaptive") || given(sub, "--no-adaptive")) g.adaptive_scale = f.adaptive;
  if (given(sub, "--distance")) g.distance = parse_distance(f.distance);
  if (given(sub, "--pair")) g.pair = parse_guidance_pair(f.pair);
  if (given(sub, "--weights")) {
    g.weights = parse_real_list(f.weights);
    g.pyramid.levels = static_cast<int>(g.weights.size());
  }
  if (given(sub, "--gamma-c")) g.content_anchor_weight = f.gamma_c;
  if (given(sub, "--grad-through-eps")) g.grad_through_eps = f.grad_through_eps;
  if (given(sub, "--min-step")) g.min_step = f.min_step;
  return loaded;
}

template <typename T>
T option_or(const json& options, const char* key, T fallback) {
  if (!options.contains(key)) return fallback;
  try {
    return options.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad manifest option '") + key + "': " + e.what());
  }
}

fs::path prepare_output(const ExperimentConfig& config) {
  const fs::path dir = resolve_output_dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::string seed_id(std::uint64_t seed) { return "seed" + std::to_string(seed); }


struct Finished {
  fs::path dir;
  std::vector<std::string> artifacts;
};

std::string relative_name(const CsvWriter& csv, const fs::path& dir) {
  return fs::relative(csv.path(), dir).generic_string();
}

Finished cmd_sample(const Loaded& in, bool telemetry) {
  const Setup setup = make_setup(in.config);
  Finished done{prepare_output(in.config), {}};
  GuidanceConfig g = in.config.guidance;
  g.threads = in.config.threads;
  CsvWriter metrics(done.dir / "metrics.csv",
                    {"run_id", "sample", "mode", "s0", "style_loss", "content_score", "batch_diversity"});
  std::optional<CsvWriter> steps;
  if (telemetry) steps.emplace(done.dir / "telemetry.csv", std::initializer_list<const char*>{"run_id", "step", "style_distance", "grad_norm", "scale"});
  for (std::uint64_t seed : in.config.seeds) {
    const BatchRun run = run_batch(setup, g, seed, telemetry);
    if (run.diverged) throw DivergedError(seed_id(seed) + ": " + run.message);
    for (const auto& r : run.report.rows) {
      metrics.row(seed_id(seed), r.index, to_string(g.mode), g.base_scale, r.style_loss, r.content_score,
                  run.report.batch_diversity);
    }
    if (steps) {
      for (const auto& t : run.telemetry) steps->row(seed_id(seed), t.step, t.style_distance, t.grad_norm, t.scale);
    }
    if (in.config.image.channels == 3) {
      for (std::size_t b = 0; b < run.images.size(); ++b) {
        const std::string name = seed_id(seed) + "_" + std::to_string(b) + ".ppm";
        emit_image(run.images[b], done.dir / name);
        done.artifacts.push_back(name);
      }
    }
  }
  metrics.close();
  done.artifacts.push_back(relative_name(metrics, done.dir));
  if (steps) {
    steps->close();
    done.artifacts.push_back(relative_name(*steps, done.dir));
  }
  return done;
}

Finished cmd_sweep(const Loaded& in, const std::vector<double>& grid) {
  const Setup setup = make_setup(in.config);
  Finished done{prepare_output(in.config), {}};
  const auto rows = run_sweep(setup, grid);
  CsvWriter csv(done.dir / "tradeoff.csv",
                {"run_id", "mode", "s0", "seed", "style_loss", "content_score", "batch_diversity", "diverged"});
  for (const auto& r : rows) {
    csv.row(seed_id(r.seed), "supervised", r.s0, r.seed, r.style_loss, r.content_score, r.batch_diversity, r.diverged);
  }
  csv.close();
  done.artifacts.push_back(relative_name(csv, done.dir));
  for (const auto& p : summarize_sweep(rows)) {
    std::cout << "s0=" << format_real(p.s0) << " style_loss=" << format_real(p.style_loss)
              << " content_score=" << format_real(p.content_score) << " diverged=" << p.diverged << '\n';
  }
  return done;
}

std::string weights_text(const std::vector<double>& w) {
  std::string out;
  for (double x : w) out += (out.empty() ? "" : ";") + format_real(x);
  return out;
}

Finished cmd_ablate(const Loaded& in, const AblationOptions& options) {
  const Setup setup = make_setup(in.config);
  Finished done{prepare_output(in.config), {}};
  const AblationResult result = run_ablation(setup, options);
  CsvWriter table(done.dir / "ablation.csv", {"setting", "label", "pair", "distance", "adaptive", "weights", "s0",
                                              "content_score", "style_loss", "diverged_runs"});
  CsvWriter runs(done.dir / "ablation_runs.csv",
                 {"setting", "seed", "s0", "style_loss", "content_score", "batch_diversity", "diverged"});
  for (const auto& s : result.settings) {
    int diverged = 0;
    for (const auto& r : s.rows) {
      diverged += r.diverged ? 1 : 0;
      runs.row(s.id, r.seed, r.s0, r.style_loss, r.content_score, r.batch_diversity, r.diverged);
    }
    table.row(s.id, s.label, to_string(s.guidance.pair), to_string(s.guidance.distance), s.guidance.adaptive_scale,
              weights_text(s.guidance.weights), s.guidance.base_scale, s.content_score, s.style_loss, diverged);
    std::cout << '#' << s.id << ' ' << s.label << " s0=" << format_real(s.guidance.base_scale)
              << " content_score=" << format_real(s.content_score) << " style_loss=" << format_real(s.style_loss)
              << '\n';
  }
  table.close();
  runs.close();
  done.artifacts.push_back(relative_name(table, done.dir));
  done.artifacts.push_back(relative_name(runs, done.dir));
  return done;
}

Finished cmd_two_step(const Loaded& in, double s0, const TransferConfig& transfer) {
  const Setup setup = make_setup(in.config);
  Finished done{prepare_output(in.config), {}};
  const TwoStepResult result = run_two_step(setup, s0, transfer);
  CsvWriter csv(done.dir / "twostep.csv",
                {"seed", "s0", "unguided", "guided", "iterative", "moment_match", "diverged"});
  for (const auto& r : result.rows) {
    csv.row(r.seed, result.s0, r.unguided, r.guided, r.iterative, r.moment_match, r.diverged);
  }
  csv.close();
  done.artifacts.push_back(relative_name(csv, done.dir));
  const char* names[] = {"twostep_unguided.ppm", "twostep_guided.ppm", "twostep_iterative.ppm",
                         "twostep_moment_match.ppm"};
  if (in.config.image.channels == 3 && result.example.size() == 4) {
    for (std::size_t i = 0; i < 4; ++i) {
      emit_image(result.example[i], done.dir / names[i]);
      done.artifacts.push_back(names[i]);
    }
  }
  std::cout << "s0=" << format_real(result.s0) << '\n';
  return done;
}

Finished cmd_diversity(const Loaded& in, double contrastive_s0, double synonymous_s0) {
  const Setup setup = make_setup(in.config);
  Finished done{prepare_output(in.config), {}};
  const DiversityResult result = run_diversity(setup, contrastive_s0, synonymous_s0);
  CsvWriter metrics(done.dir / "diversity.csv",
                    {"run_id", "mode", "s0", "seed", "batch_diversity", "feature_variance", "content_score", "diverged"});
  for (const auto& r : result.rows) {
    metrics.row(r.mode + "_" + seed_id(r.seed), r.mode, r.s0, r.seed, r.batch_diversity, r.feature_variance,
                r.content_score, r.diverged);
  }
  metrics.close();
  CsvWriter embedding(done.dir / "embedding.csv", {"x", "y", "run_id"});
  for (std::size_t i = 0; i < result.embedding.points.size(); ++i) {
    embedding.row(result.embedding.points[i][0], result.embedding.points[i][1], result.embedding_ids[i]);
  }
  embedding.close();
  done.artifacts.push_back(relative_name(metrics, done.dir));
  done.artifacts.push_back(relative_name(embedding, done.dir));
  return done;
}

Finished cmd_train(const Loaded& in, const AffineTrainConfig& train, std::uint64_t seed) {
  const Setup setup = make_setup(in.config);
  Finished done{prepare_output(in.config), {}};
  const AffineTrainResult result = run_training(setup, train, seed);
  const std::string model_name = "affine_denoiser.txt";
  {
    std::ofstream out(done.dir / model_name);
    if (!out) throw IoError("cannot open " + (done.dir / model_name).string() + " for writing");
    write_affine(result.model, out);
    if (!out) throw IoError("failed writing " + (done.dir / model_name).string());
  }
  done.artifacts.push_back(model_name);
  // Mean batch loss over consecutive windows of 100 iterations.
  CsvWriter loss(done.dir / "train_loss.csv", {"iteration", "loss"});
  const std::size_t window = 100;
  for (std::size_t start = 0; start < result.loss_trace.size(); start += window) {
    const std::size_t end = std::min(result.loss_trace.size(), start + window);
    double sum = 0.0;
    for (std::size_t i = start; i < end; ++i) sum += result.loss_trace[i];
    loss.row(end, sum / static_cast<double>(end - start));
  }
  loss.close();
  done.artifacts.push_back(relative_name(loss, done.dir));
  std::cout << "final_loss=" << format_real(result.final_loss) << " model=" << (done.dir / model_name).string() << '\n';
  return done;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Guided diffusion sampling with style guidance"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* train = app.add_subcommand("train", "Fit the affine denoiser to the data law");
  auto* sample = app.add_subcommand("sample", "Sample batches and write images and metrics.csv");
  auto* sweep = app.add_subcommand("sweep", "Supervised s0 sweep, writes tradeoff.csv");
  auto* ablate = app.add_subcommand("ablate", "Guidance-setting ablation with per-setting s0 retuning");
  auto* two_step = app.add_subcommand("two-step", "Guided sampling against transfer after unguided sampling");
  auto* diversity = app.add_subcommand("diversity", "Unguided, contrastive and synonymous batch diversity");
  for (auto* sub : {train, sample, sweep, ablate, two_step, diversity}) add_common(sub, flags);

  AffineTrainConfig train_cfg;
  std::uint64_t train_seed = 0;
  train->add_option("--iterations", train_cfg.iterations, "SGD iterations");
  train->add_option("--learning-rate", train_cfg.learning_rate, "Learning rate");
  train->add_option("--train-batch", train_cfg.batch_size, "Samples per SGD step");
  train->add_option("--average-tail", train_cfg.average_tail, "Fraction of iterates averaged at the end");
  train->add_option("--train-seed", train_seed, "Training seed");

  double sample_s0 = 0.0;
  bool telemetry = false;
  sample->add_option("--s0", sample_s0, "Guidance base scale");
  sample->add_flag("--telemetry", telemetry, "Write per-step guidance telemetry");

  std::string sweep_grid;
  sweep->add_option("--s0", sweep_grid, "Comma separated s0 grid");

  std::string ablate_grid;
  std::string tuning_seeds;
  ablate->add_option("--grid", ablate_grid, "Comma separated s0 retuning grid");
  ablate->add_option("--tuning-seeds", tuning_seeds, "Seeds used for retuning");

  double two_step_s0 = -1.0;
  TransferConfig transfer;
  two_step->add_option("--s0", two_step_s0, "Guided-arm s0 (default: chosen by a sweep)");
  two_step->add_option("--iterations", transfer.iterations, "Iterative transfer steps");
  two_step->add_option("--step-size", transfer.step_size, "Iterative transfer step size");
  two_step->add_option("--content-weight", transfer.content_weight, "Iterative transfer content weight");

  double contrastive_s0 = kDefaultSelfScale;
  double synonymous_s0 = kDefaultSelfScale;
  diversity->add_option("--contrastive-s0", contrastive_s0, "Contrastive base scale");
  diversity->add_option("--synonymous-s0", synonymous_s0, "Synonymous base scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  Loaded in = load_config(sub, flags, command);
  json options = json::object();
  Finished done;

  if (sub == sample) {
    if (given(sub, "--s0")) in.config.guidance.base_scale = sample_s0;
    telemetry = given(sub, "--telemetry") ? telemetry : option_or(in.options, "telemetry", false);
    options["telemetry"] = telemetry;
    done = cmd_sample(in, telemetry);
  } else if (sub == sweep) {
    const std::vector<double> grid =
        given(sub, "--s0") ? parse_real_list(sweep_grid) : option_or(in.options, "s0_grid", default_s0_grid());
    options["s0_grid"] = grid;
    done = cmd_sweep(in, grid);
  } else if (sub == ablate) {
    AblationOptions opt = default_ablation_options();
    opt.s0_grid = given(sub, "--grid") ? parse_real_list(ablate_grid) : option_or(in.options, "s0_grid", opt.s0_grid);
    opt.tuning_seeds = given(sub, "--tuning-seeds") ? parse_seed_list(tuning_seeds)
                                                    : option_or(in.options, "tuning_seeds", opt.tuning_seeds);
    opt.weight_candidates = option_or(in.options, "weight_candidates", opt.weight_candidates);
    options["s0_grid"] = opt.s0_grid;
    options["tuning_seeds"] = opt.tuning_seeds;
    options["weight_candidates"] = opt.weight_candidates;
    done = cmd_ablate(in, opt);
  } else if (sub == two_step) {
    if (!given(sub, "--s0")) two_step_s0 = option_or(in.options, "s0", two_step_s0);
    if (!given(sub, "--iterations")) transfer.iterations = option_or(in.options, "iterations", transfer.iterations);
    if (!given(sub, "--step-size")) transfer.step_size = option_or(in.options, "step_size", transfer.step_size);
    if (!given(sub, "--content-weight")) {
      transfer.content_weight = option_or(in.options, "content_weight", transfer.content_weight);
    }
    options = {{"s0", two_step_s0},
               {"iterations", transfer.iterations},
               {"step_size", transfer.step_size},
               {"content_weight", transfer.content_weight}};
    done = cmd_two_step(in, two_step_s0, transfer);
  } else if (sub == diversity) {
    if (!given(sub, "--contrastive-s0")) contrastive_s0 = option_or(in.options, "contrastive_s0", contrastive_s0);
    if (!given(sub, "--synonymous-s0")) synonymous_s0 = option_or(in.options, "synonymous_s0", synonymous_s0);
    options = {{"contrastive_s0", contrastive_s0}, {"synonymous_s0", synonymous_s0}};
    done = cmd_diversity(in, contrastive_s0, synonymous_s0);
  } else {
    if (!given(sub, "--iterations")) train_cfg.iterations = option_or(in.options, "iterations", train_cfg.iterations);
    if (!given(sub, "--learning-rate")) {
      train_cfg.learning_rate = option_or(in.options, "learning_rate", train_cfg.learning_rate);
    }
    if (!given(sub, "--train-batch")) train_cfg.batch_size = option_or(in.options, "batch_size", train_cfg.batch_size);
    if (!given(sub, "--average-tail")) {
      train_cfg.average_tail = option_or(in.options, "average_tail", train_cfg.average_tail);
    }
    if (!given(sub, "--train-seed")) train_seed = option_or(in.options, "seed", train_seed);
    options = {{"iterations", train_cfg.iterations},
               {"learning_rate", train_cfg.learning_rate},
               {"batch_size", train_cfg.batch_size},
               {"average_tail", train_cfg.average_tail},
               {"seed", train_seed}};
    done = cmd_train(in, train_cfg, train_seed);
  }
  write_manifest(done.dir, command, to_json(in.config), options, done.artifacts);
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  try {
    return run(argc, argv);
  } catch (const DivergedError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IndexError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericGuardError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace styleguide
