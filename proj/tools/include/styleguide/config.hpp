#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "styleguide/guidance.hpp"
#include "styleguide/image.hpp"
#include "styleguide/schedule.hpp"

namespace styleguide {

struct DataSpec {
  std::string kind = "gmm";  // gaussian | gmm
  double sigma = 0.1;
  std::uint64_t seed = 1;
  std::string template_name = "checkerboard";  // mean image of the gaussian law
  std::string denoiser;                         // trained affine model file; empty uses the analytic denoiser
};

struct ScheduleSpec {
  int steps = kDefaultSteps;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;
};

// Either a named template (rendered at the image size) or a PPM file.
struct ReferenceSpec {
  std::string template_name = "diagonal_waves";
  std::uint64_t seed = 0;
  std::string path;
};

struct ExperimentConfig {
  DataSpec data;
  ScheduleSpec schedule;
  Shape image{16, 16, 3};
  int batch_size = 8;
  GuidanceConfig guidance;
  ReferenceSpec reference;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  int threads = 1;
};

// Twenty seeds 0..19.
std::vector<std::uint64_t> default_seeds();
ExperimentConfig default_experiment();

// Throws ConfigError on inconsistent settings (and DimensionError when the
// image is too small for the pyramid). Referenced files must exist.
void validate(const ExperimentConfig& config);

nlohmann::json to_json(const GuidanceConfig& config);
// Keys absent from j keep the values in `base`. Unknown keys are rejected.
GuidanceConfig guidance_from_json(const nlohmann::json& j, GuidanceConfig base = {});

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_from_json(const nlohmann::json& j, ExperimentConfig base = default_experiment());

nlohmann::json read_json_file(const std::filesystem::path& path);

// "0,10,1e3" -> {0, 10, 1000}
std::vector<double> parse_real_list(const std::string& text);
// "0-19" or "1,4,9" (ranges and items may be mixed)
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// output_dir, placed under $STYLEGUIDE_OUTPUT_ROOT when that is set and the path is relative.
std::filesystem::path resolve_output_dir(const std::string& output_dir);

}  // namespace styleguide
