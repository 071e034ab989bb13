#include "styleguide/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "styleguide/errors.hpp"
#include "styleguide/style.hpp"
#include "styleguide/templates.hpp"

namespace styleguide {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

std::vector<std::uint64_t> default_seeds() {
  std::vector<std::uint64_t> seeds(20);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
  return seeds;
}

ExperimentConfig default_experiment() {
  ExperimentConfig config;
  config.seeds = default_seeds();
  return config;
}

void validate(const ExperimentConfig& config) {
  if (config.data.kind != "gaussian" && config.data.kind != "gmm") {
    throw ConfigError("data kind must be 'gaussian' or 'gmm', got '" + config.data.kind + "'");
  }
  if (!(config.data.sigma > 0.0)) throw ConfigError("data sigma must be positive");
  if (config.data.kind == "gaussian") find_template(config.data.template_name);
  if (!config.data.denoiser.empty() && !std::filesystem::exists(config.data.denoiser)) {
    throw ConfigError("denoiser file not found: " + config.data.denoiser);
  }
  if (config.image.height < 1 || config.image.width < 1 || config.image.channels < 1) {
    throw ConfigError("image dimensions must be positive");
  }
  if (config.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (config.seeds.empty()) throw ConfigError("at least one seed is required");
  if (config.threads < 1) throw ConfigError("threads must be at least 1");
  validate(config.guidance);
  require_pyramid_fits(config.image, config.guidance.pyramid);
  const bool self_mode =
      config.guidance.mode == GuidanceMode::Contrastive || config.guidance.mode == GuidanceMode::Synonymous;
  if (self_mode && config.batch_size < 2) {
    throw ConfigError(std::string(to_string(config.guidance.mode)) + " guidance needs a batch of at least 2");
  }
  if (config.reference.path.empty()) {
    find_template(config.reference.template_name);
  } else if (!std::filesystem::exists(config.reference.path)) {
    throw ConfigError("reference image not found: " + config.reference.path);
  }
}

json to_json(const GuidanceConfig& config) {
  return json{{"mode", to_string(config.mode)},
              {"s0", config.base_scale},
              {"adaptive", config.adaptive_scale},
              {"distance", to_string(config.distance)},
              {"pair", to_string(config.pair)},
              {"weights", config.weights},
              {"gamma_c", config.content_anchor_weight},
              {"grad_through_eps", config.grad_through_eps},
              {"min_step", config.min_step}};
}

GuidanceConfig guidance_from_json(const json& j, GuidanceConfig base) {
  reject_unknown(j, {"mode", "s0", "adaptive", "distance", "pair", "weights", "gamma_c", "grad_through_eps", "min_step"},
                 "guidance");
  std::string text;
  if (j.contains("mode")) {
    read(j, "mode", text);
    base.mode = parse_guidance_mode(text);
  }
  read(j, "s0", base.base_scale);
  read(j, "adaptive", base.adaptive_scale);
  if (j.contains("distance")) {
    read(j, "distance", text);
    base.distance = parse_distance(text);
  }
  if (j.contains("pair")) {
    read(j, "pair", text);
    base.pair = parse_guidance_pair(text);
  }
  read(j, "weights", base.weights);
  read(j, "gamma_c", base.content_anchor_weight);
  read(j, "grad_through_eps", base.grad_through_eps);
  read(j, "min_step", base.min_step);
  base.pyramid.levels = static_cast<int>(base.weights.size());
  return base;
}

json to_json(const ExperimentConfig& config) {
  json reference = config.reference.path.empty()
                       ? json{{"template", config.reference.template_name}, {"seed", config.reference.seed}}
                       : json{{"path", config.reference.path}};
  return json{{"data",
               {{"kind", config.data.kind},
                {"sigma", config.data.sigma},
                {"seed", config.data.seed},
                {"template", config.data.template_name},
                {"denoiser", config.data.denoiser}}},
              {"schedule",
               {{"steps", config.schedule.steps},
                {"beta_start", config.schedule.beta_start},
                {"beta_end", config.schedule.beta_end}}},
              {"image_size",
               {{"height", config.image.height}, {"width", config.image.width}, {"channels", config.image.channels}}},
              {"batch_size", config.batch_size},
              {"guidance", to_json(config.guidance)},
              {"reference", reference},
              {"seeds", config.seeds},
              {"output_dir", config.output_dir},
              {"threads", config.threads}};
}

ExperimentConfig experiment_from_json(const json& j, ExperimentConfig base) {
  reject_unknown(j,
                 {"data", "schedule", "image_size", "batch_size", "guidance", "reference", "seeds", "output_dir",
                  "threads"},
                 "experiment config");
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown(d, {"kind", "sigma", "seed", "template", "denoiser"}, "data");
    read(d, "kind", base.data.kind);
    read(d, "sigma", base.data.sigma);
    read(d, "seed", base.data.seed);
    read(d, "template", base.data.template_name);
    read(d, "denoiser", base.data.denoiser);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    reject_unknown(s, {"steps", "beta_start", "beta_end"}, "schedule");
    read(s, "steps", base.schedule.steps);
    read(s, "beta_start", base.schedule.beta_start);
    read(s, "beta_end", base.schedule.beta_end);
  }
  if (j.contains("image_size")) {
    const json& s = j.at("image_size");
    reject_unknown(s, {"height", "width", "channels"}, "image_size");
    read(s, "height", base.image.height);
    read(s, "width", base.image.width);
    read(s, "channels", base.image.channels);
  }
  read(j, "batch_size", base.batch_size);
  if (j.contains("guidance")) base.guidance = guidance_from_json(j.at("guidance"), base.guidance);
  if (j.contains("reference")) {
    const json& r = j.at("reference");
    reject_unknown(r, {"template", "seed", "path"}, "reference");
    if (r.contains("path") && r.contains("template")) {
      throw ConfigError("reference takes either 'template' or 'path', not both");
    }
    if (r.contains("template")) base.reference.path.clear();
    read(r, "template", base.reference.template_name);
    read(r, "seed", base.reference.seed);
    read(r, "path", base.reference.path);
  }
  read(j, "seeds", base.seeds);
  read(j, "output_dir", base.output_dir);
  read(j, "threads", base.threads);
  return base;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError("not a number in list: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list '" + text + "'");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  auto parse_one = [](const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty() || s.front() == '-') throw ConfigError("bad seed '" + s + "'");
    return static_cast<std::uint64_t>(v);
  };
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(parse_one(item));
      continue;
    }
    const std::uint64_t lo = parse_one(item.substr(0, dash));
    const std::uint64_t hi = parse_one(item.substr(dash + 1));
    if (hi < lo) throw ConfigError("descending seed range '" + item + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("empty seed list '" + text + "'");
  return out;
}

std::filesystem::path resolve_output_dir(const std::string& output_dir) {
  std::filesystem::path dir(output_dir);
  const char* root = std::getenv("STYLEGUIDE_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && dir.is_relative()) return std::filesystem::path(root) / dir;
  return dir;
}

}  // namespace styleguide
