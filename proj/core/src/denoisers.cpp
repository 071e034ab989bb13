#include "styleguide/denoisers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "styleguide/errors.hpp"
#include "styleguide/templates.hpp"

namespace styleguide {

void validate(const GaussianData& data) {
  if (data.mean.empty()) throw ConfigError("Gaussian data law has no mean image");
  if (!(data.sigma0 > 0.0)) throw ConfigError("Gaussian data law needs sigma0 > 0");
}

void validate(const GmmData& data) {
  if (data.components.empty()) throw ConfigError("mixture data law has no components");
  double total = 0.0;
  for (const auto& c : data.components) {
    if (!(c.weight > 0.0)) throw ConfigError("mixture weights must be positive");
    if (!(c.sigma > 0.0)) throw ConfigError("mixture component sigma must be positive");
    if (c.mean.empty() || c.mean.shape() != data.components.front().mean.shape()) {
      throw DimensionError("mixture component means must share one shape");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
}

void validate(const DataLaw& data) {
  std::visit([](const auto& d) { validate(d); }, data);
}

Shape data_shape(const DataLaw& data) {
  if (const auto* g = std::get_if<GaussianData>(&data)) return g->mean.shape();
  return std::get<GmmData>(data).components.at(0).mean.shape();
}

Image draw_sample(const DataLaw& data, RngStream& rng) {
  if (const auto* g = std::get_if<GaussianData>(&data)) {
    return add_scaled(g->mean, gaussian_noise(g->mean.shape(), rng), g->sigma0);
  }
  const auto& comps = std::get<GmmData>(data).components;
  const double u = rng.uniform();
  std::size_t k = 0;
  double acc = comps[0].weight;
  while (u >= acc && k + 1 < comps.size()) acc += comps[++k].weight;
  return add_scaled(comps[k].mean, gaussian_noise(comps[k].mean.shape(), rng), comps[k].sigma);
}

double posterior_shrinkage(double alpha_bar, double sigma) {
  const double s2 = sigma * sigma;
  return s2 / (alpha_bar * s2 + 1.0 - alpha_bar);
}

namespace {

// eps_hat for one Gaussian component: (x_t - sqrt(abar) E[x0|x_t]) / sqrt(1 - abar),
// which reduces to sqrt(1 - abar) / (abar sigma^2 + 1 - abar) * (x_t - sqrt(abar) m).
void gaussian_eps_into(const Image& x_t, double abar, const Image& mean, double sigma, double weight, Image& out) {
  const double coef = weight * std::sqrt(1.0 - abar) / (abar * sigma * sigma + 1.0 - abar);
  const double root = std::sqrt(abar);
  auto dst = out.data();
  auto x = x_t.data();
  auto m = mean.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += coef * (x[i] - root * m[i]);
}

}  // namespace

Image analytic_gaussian_eps(const Image& x_t, int t, const NoiseSchedule& sched, const GaussianData& data) {
  require_step(sched, t);
  require_same_shape(x_t, data.mean, "analytic_gaussian_eps");
  Image out(x_t.shape());
  gaussian_eps_into(x_t, sched.alpha_bar(t), data.mean, data.sigma0, 1.0, out);
  return out;
}

std::vector<double> gmm_responsibilities(const Image& x_t, int t, const NoiseSchedule& sched, const GmmData& data) {
  require_step(sched, t);
  const double abar = sched.alpha_bar(t);
  const double root = std::sqrt(abar);
  const auto dim = static_cast<double>(x_t.size());
  std::vector<double> logits(data.components.size());
  for (std::size_t k = 0; k < data.components.size(); ++k) {
    const auto& c = data.components[k];
    require_same_shape(x_t, c.mean, "gmm_responsibilities");
    const double var = abar * c.sigma * c.sigma + 1.0 - abar;
    double sq = 0.0;
    auto x = x_t.data();
    auto m = c.mean.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - root * m[i];
      sq += d * d;
    }
    logits[k] = std::log(c.weight) - 0.5 * dim * std::log(var) - 0.5 * sq / var;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - top);
    total += l;
  }
  for (double& l : logits) l /= total;
  return logits;
}

Image analytic_gmm_eps(const Image& x_t, int t, const NoiseSchedule& sched, const GmmData& data) {
  const std::vector<double> resp = gmm_responsibilities(x_t, t, sched, data);
  const double abar = sched.alpha_bar(t);
  Image out(x_t.shape());
  for (std::size_t k = 0; k < resp.size(); ++k) {
    if (resp[k] == 0.0) continue;
    const auto& c = data.components[k];
    gaussian_eps_into(x_t, abar, c.mean, c.sigma, resp[k], out);
  }
  return out;
}

GaussianDenoiser::GaussianDenoiser(GaussianData data) : data_(std::move(data)) { validate(data_); }

Image GaussianDenoiser::predict(const Image& x_t, int t, const NoiseSchedule& sched) const {
  return analytic_gaussian_eps(x_t, t, sched, data_);
}

std::optional<double> GaussianDenoiser::x0_jacobian(int t, const NoiseSchedule& sched) const {
  const double abar = sched.alpha_bar(t);
  return std::sqrt(abar) * posterior_shrinkage(abar, data_.sigma0);
}

GmmDenoiser::GmmDenoiser(GmmData data) : data_(std::move(data)) { validate(data_); }

Image GmmDenoiser::predict(const Image& x_t, int t, const NoiseSchedule& sched) const {
  return analytic_gmm_eps(x_t, t, sched, data_);
}

AffineDenoiser::AffineDenoiser(int steps, Image bias)
    : a_(static_cast<std::size_t>(std::max(steps, 0)) + 1, 0.0),
      b_(static_cast<std::size_t>(std::max(steps, 0)) + 1, 0.0),
      bias_(std::move(bias)) {
  if (steps < 1) throw ConfigError("affine denoiser needs at least one step");
}

AffineDenoiser::AffineDenoiser(std::vector<double> a, std::vector<double> b, Image bias)
    : a_(std::move(a)), b_(std::move(b)), bias_(std::move(bias)) {
  if (a_.size() < 2 || a_.size() != b_.size()) throw ConfigError("affine coefficient arrays must have length T + 1");
}

Image AffineDenoiser::predict(const Image& x_t, int t, const NoiseSchedule& sched) const {
  require_step(sched, t);
  if (t > steps()) throw IndexError("affine denoiser trained for " + std::to_string(steps()) + " steps");
  require_same_shape(x_t, bias_, "affine denoiser");
  const double at = a_[static_cast<std::size_t>(t)];
  const double bt = b_[static_cast<std::size_t>(t)];
  Image out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at * x_t[i] + bt * bias_[i];
  return out;
}

std::optional<double> AffineDenoiser::x0_jacobian(int t, const NoiseSchedule& sched) const {
  const double abar = sched.alpha_bar(t);
  return (1.0 - std::sqrt(1.0 - abar) * a_.at(static_cast<std::size_t>(t))) / std::sqrt(abar);
}

AffineTrainResult train_affine(const DataLaw& data, const NoiseSchedule& sched, const AffineTrainConfig& config,
                               const RngStream& rng) {
  validate(data);
  if (config.iterations < 1) throw ConfigError("training needs at least one iteration");
  if (config.batch_size < 1) throw ConfigError("training batch size must be positive");
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(config.average_tail >= 0.0 && config.average_tail <= 1.0)) {
    throw ConfigError("average_tail must lie in [0, 1]");
  }

  const int steps = sched.steps;
  const Shape shape = data_shape(data);
  const auto n_steps = static_cast<std::size_t>(steps) + 1;
  const auto pixels = static_cast<double>(shape.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);

  std::vector<double> a(n_steps, 0.0);
  std::vector<double> b(n_steps, 0.0);
  Image bias(shape);

  // The bias tracks the running mean of every x0 drawn; for a shared-slope
  // affine predictor the optimal intercept is always proportional to E[x0].
  Image x0_sum(shape);
  double x0_count = 0.0;

  // Per-step running second moments of the regressors (x_t, bias), used as a
  // Gauss-Newton preconditioner for the (a_t, b_t) update.
  struct Moments {
    double xx = 0.0, xm = 0.0, mm = 0.0;
    double count = 0.0;
  };
  std::vector<Moments> moments(n_steps);
  std::vector<double> grad_a(n_steps, 0.0);
  std::vector<double> grad_b(n_steps, 0.0);
  std::vector<char> touched(n_steps, 0);

  const int tail_start = config.iterations - static_cast<int>(std::floor(config.average_tail * config.iterations));
  std::vector<double> sum_a(n_steps, 0.0);
  std::vector<double> sum_b(n_steps, 0.0);
  double tail_count = 0.0;

  std::vector<double> loss_trace;
  loss_trace.reserve(static_cast<std::size_t>(config.iterations));

  const RngStream base = rng.derive(stream_tag::kTraining);
  std::vector<Image> x0s(batch);
  std::vector<int> ts(batch);
  std::vector<Image> epss(batch);

  for (int it = 0; it < config.iterations; ++it) {
    RngStream step_rng = base.derive(static_cast<std::uint64_t>(it));
    for (std::size_t j = 0; j < batch; ++j) {
      x0s[j] = draw_sample(data, step_rng);
      ts[j] = 1 + static_cast<int>(step_rng.uniform_index(static_cast<std::uint64_t>(steps)));
      epss[j] = gaussian_noise(shape, step_rng);
      add_scaled_inplace(x0_sum, x0s[j], 1.0);
      x0_count += 1.0;
    }
    for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = x0_sum[i] / x0_count;

    double batch_loss = 0.0;
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < batch; ++j) {
      const int t = ts[j];
      const auto ti = static_cast<std::size_t>(t);
      const double root = std::sqrt(sched.alpha_bar(t));
      const double noise_scale = std::sqrt(1.0 - sched.alpha_bar(t));
      double loss = 0.0, rx = 0.0, rm = 0.0, xx = 0.0, xm = 0.0, mm = 0.0;
      for (std::size_t i = 0; i < x0s[j].size(); ++i) {
        const double x = root * x0s[j][i] + noise_scale * epss[j][i];
        const double m = bias[i];
        const double r = epss[j][i] - a[ti] * x - b[ti] * m;
        loss += r * r;
        rx += r * x;
        rm += r * m;
        xx += x * x;
        xm += x * m;
        mm += m * m;
      }
      batch_loss += loss / pixels;
      grad_a[ti] += -2.0 * rx / pixels / static_cast<double>(batch);
      grad_b[ti] += -2.0 * rm / pixels / static_cast<double>(batch);
      Moments& mo = moments[ti];
      mo.xx += xx / pixels;
      mo.xm += xm / pixels;
      mo.mm += mm / pixels;
      mo.count += 1.0;
      if (!touched[ti]) {
        touched[ti] = 1;
        active.push_back(ti);
      }
    }
    batch_loss /= static_cast<double>(batch);
    if (!std::isfinite(batch_loss)) {
      throw TrainingDivergedError("training loss became non-finite at iteration " + std::to_string(it));
    }
    loss_trace.push_back(batch_loss);

    // Expected Hessian of the batch loss in (a_t, b_t) is 2 G_t / T.
    for (std::size_t ti : active) {
      const Moments& mo = moments[ti];
      const double scale = 2.0 / static_cast<double>(steps);
      const double h11 = scale * mo.xx / mo.count + 1e-12;
      const double h12 = scale * mo.xm / mo.count;
      const double h22 = scale * mo.mm / mo.count + 1e-12;
      const double det = h11 * h22 - h12 * h12;
      double da = 0.0, db = 0.0;
      if (det > 1e-12 * h11 * h22) {
        da = (h22 * grad_a[ti] - h12 * grad_b[ti]) / det;
        db = (h11 * grad_b[ti] - h12 * grad_a[ti]) / det;
      } else {
        da = grad_a[ti] / h11;
        db = grad_b[ti] / h22;
      }
      a[ti] -= config.learning_rate * da;
      b[ti] -= config.learning_rate * db;
      grad_a[ti] = 0.0;
      grad_b[ti] = 0.0;
      touched[ti] = 0;
    }

    if (it >= tail_start) {
      for (std::size_t ti = 1; ti < n_steps; ++ti) {
        sum_a[ti] += a[ti];
        sum_b[ti] += b[ti];
      }
      tail_count += 1.0;
    }
  }

  if (tail_count > 0.0) {
    for (std::size_t ti = 1; ti < n_steps; ++ti) {
      a[ti] = sum_a[ti] / tail_count;
      b[ti] = sum_b[ti] / tail_count;
    }
  }

  const std::size_t window = std::min<std::size_t>(100, loss_trace.size());
  double tail_loss = 0.0;
  for (std::size_t i = loss_trace.size() - window; i < loss_trace.size(); ++i) tail_loss += loss_trace[i];
  return AffineTrainResult{AffineDenoiser(std::move(a), std::move(b), std::move(bias)),
                           tail_loss / static_cast<double>(window), std::move(loss_trace)};
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr const char* kAffineMagic = "styleguide-affine-denoiser";

}  // namespace

void write_affine(const AffineDenoiser& model, std::ostream& out) {
  const Image& bias = model.bias();
  out << kAffineMagic << " 1\n";
  out << "steps " << model.steps() << "\n";
  out << "shape " << bias.height() << " " << bias.width() << " " << bias.channels() << "\n";
  for (int t = 1; t <= model.steps(); ++t) {
    out << t << " " << format_double(model.a()[static_cast<std::size_t>(t)]) << " "
        << format_double(model.b()[static_cast<std::size_t>(t)]) << "\n";
  }
  out << "bias\n";
  for (int y = 0; y < bias.height(); ++y) {
    for (int x = 0; x < bias.width(); ++x) {
      for (int c = 0; c < bias.channels(); ++c) {
        if (x > 0 || c > 0) out << ' ';
        out << format_double(bias.at(y, x, c));
      }
    }
    out << "\n";
  }
}

AffineDenoiser read_affine(std::istream& in) {
  auto fail = [](const std::string& what) { return IoError("malformed affine denoiser file: " + what); };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kAffineMagic || version != 1) throw fail("bad header");
  std::string key;
  int steps = 0;
  if (!(in >> key >> steps) || key != "steps" || steps < 1) throw fail("bad steps line");
  Shape shape;
  if (!(in >> key >> shape.height >> shape.width >> shape.channels) || key != "shape") throw fail("bad shape line");
  if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) throw fail("non-positive shape");
  std::vector<double> a(static_cast<std::size_t>(steps) + 1, 0.0);
  std::vector<double> b(a.size(), 0.0);
  for (int t = 1; t <= steps; ++t) {
    int idx = 0;
    if (!(in >> idx >> a[static_cast<std::size_t>(t)] >> b[static_cast<std::size_t>(t)]) || idx != t) {
      throw fail("bad coefficient line for step " + std::to_string(t));
    }
  }
  if (!(in >> key) || key != "bias") throw fail("missing bias block");
  std::vector<double> values(shape.size());
  for (double& v : values) {
    if (!(in >> v)) throw fail("truncated bias block");
  }
  return AffineDenoiser(std::move(a), std::move(b), Image(shape, std::move(values)));
}

GmmData default_style_population(Shape shape, std::uint64_t seed, double sigma) {
  static const char* kModes[] = {"horizontal_stripes", "vertical_stripes", "checkerboard", "radial_gradient"};
  GmmData data;
  for (const char* name : kModes) data.components.push_back({0.25, render_template(name, shape, seed), sigma});
  return data;
}

}  // namespace styleguide
