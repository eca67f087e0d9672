#pragma once

#include <Eigen/Dense>

#include <string_view>

#include "fewstep/schedules.hpp"
#include "fewstep/structure.hpp"

namespace fewstep {

enum class Parameterization { x_pred, v_pred };
enum class Pathway { none, a, b };

std::string_view to_string(Parameterization p);
Parameterization parse_parameterization(std::string_view s);
std::string_view to_string(Pathway p);
Pathway parse_pathway(std::string_view s);

/// Conditioning C. Pathway a carries reference-derived pair summaries,
/// pathway b sequence/class-only features; both share the same width.
struct Condition {
  Pathway pathway = Pathway::none;
  Eigen::MatrixXd features;  // atoms x cond_dim
};

/// Sampler time plus the noise level the input actually carries. The two
/// agree (sigma == sigma_at(t)) except when churn lifts sigma above sigma_max.
struct NoiseTime {
  double t = 0.0;
  double sigma = 0.0;
};

NoiseTime noise_time(double t, const NoiseLevelParams& p);

/// The Diffuser: x-prediction backends return a denoised structure, velocity
/// backends return dx/dt along the straight noise-to-data path.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Parameterization parameterization() const = 0;
  virtual Coords predict(const Coords& x, NoiseTime nt, const Condition& c) const = 0;

  // x1 estimate for either parameterization.
  Coords denoise(const Coords& x, NoiseTime nt, const Condition& c) const;
};

// x1_hat = x_t + (1 - t) v.
Coords v_to_x(const Coords& v, const Coords& x_t, double t);
// v = (x1_hat - x_t) / (1 - t); DomainError at t = 1.
Coords x_to_v(const Coords& x1_hat, const Coords& x_t, double t);

/// EDM preconditioning: D(x) = c_skip x + c_out F(c_in x, c_noise).
struct EdmPrecond {
  double c_skip = 1.0;
  double c_out = 0.0;
  double c_in = 1.0;
  double c_noise = 0.0;
};

EdmPrecond edm_precond(double sigma, double sigma_data);

}  // namespace fewstep
