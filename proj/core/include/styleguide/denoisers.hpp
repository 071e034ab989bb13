#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "styleguide/image.hpp"
#include "styleguide/rng.hpp"
#include "styleguide/sampler.hpp"
#include "styleguide/schedule.hpp"

namespace styleguide {

// Isotropic Gaussian data law N(mean, sigma0^2 I).
struct GaussianData {
  Image mean;
  double sigma0 = 0.1;
};

struct GmmComponent {
  double weight = 1.0;
  Image mean;
  double sigma = 0.1;
};

struct GmmData {
  std::vector<GmmComponent> components;
};

using DataLaw = std::variant<GaussianData, GmmData>;

void validate(const GaussianData& data);
void validate(const GmmData& data);
void validate(const DataLaw& data);
Shape data_shape(const DataLaw& data);
Image draw_sample(const DataLaw& data, RngStream& rng);

// Posterior shrinkage sigma0^2 / (abar sigma0^2 + 1 - abar); E[x0 | x_t] = m + sqrt(abar) * shrinkage * (x_t - sqrt(abar) m).
double posterior_shrinkage(double alpha_bar, double sigma);

Image analytic_gaussian_eps(const Image& x_t, int t, const NoiseSchedule& sched, const GaussianData& data);

// Posterior component responsibilities r_k(x_t), computed in log space.
std::vector<double> gmm_responsibilities(const Image& x_t, int t, const NoiseSchedule& sched, const GmmData& data);
Image analytic_gmm_eps(const Image& x_t, int t, const NoiseSchedule& sched, const GmmData& data);

class GaussianDenoiser final : public DenoiserModel {
 public:
  explicit GaussianDenoiser(GaussianData data);

  Image predict(const Image& x_t, int t, const NoiseSchedule& sched) const override;
  bool exact_jacobian() const override { return true; }
  std::optional<double> x0_jacobian(int t, const NoiseSchedule& sched) const override;

  const GaussianData& data() const noexcept { return data_; }

 private:
  GaussianData data_;
};

class GmmDenoiser final : public DenoiserModel {
 public:
  explicit GmmDenoiser(GmmData data);

  Image predict(const Image& x_t, int t, const NoiseSchedule& sched) const override;

  const GmmData& data() const noexcept { return data_; }

 private:
  GmmData data_;
};

// eps_hat = a_t x_t + b_t bias, with one (a_t, b_t) pair per step and a shared bias image.
class AffineDenoiser final : public DenoiserModel {
 public:
  AffineDenoiser(int steps, Image bias);
  AffineDenoiser(std::vector<double> a, std::vector<double> b, Image bias);

  Image predict(const Image& x_t, int t, const NoiseSchedule& sched) const override;
  bool exact_jacobian() const override { return true; }
  std::optional<double> x0_jacobian(int t, const NoiseSchedule& sched) const override;

  int steps() const noexcept { return static_cast<int>(a_.size()) - 1; }
  // Indexed by step t in [1, T]; entry 0 is unused.
  const std::vector<double>& a() const noexcept { return a_; }
  const std::vector<double>& b() const noexcept { return b_; }
  const Image& bias() const noexcept { return bias_; }

 private:
  std::vector<double> a_;
  std::vector<double> b_;
  Image bias_;
};

struct AffineTrainConfig {
  double learning_rate = 0.01;
  int iterations = 50000;
  int batch_size = 32;
  // Iterates are averaged over this trailing fraction of the run.
  double average_tail = 0.5;
};

struct AffineTrainResult {
  AffineDenoiser model;
  double final_loss = 0.0;
  std::vector<double> loss_trace;  // one batch loss per iteration
};

AffineTrainResult train_affine(const DataLaw& data, const NoiseSchedule& sched, const AffineTrainConfig& config,
                               const RngStream& rng);

// Text format: header, one "t a_t b_t" line per step, then the bias raster.
void write_affine(const AffineDenoiser& model, std::ostream& out);
AffineDenoiser read_affine(std::istream& in);

// Four procedural texture modes (stripes both ways, checkerboard, radial
// gradient), equal weights, common sigma.
GmmData default_style_population(Shape shape, std::uint64_t seed, double sigma = 0.1);

}  // namespace styleguide
