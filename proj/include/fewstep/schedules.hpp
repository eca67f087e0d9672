#pragma once

#include <vector>

#include "fewstep/rng.hpp"
#include "fewstep/structure.hpp"

namespace fewstep {

/// Noise-level schedule sigma(t) over normalized sampler time t in [0, 1].
///
/// sigma(t) = (sigma_max^(1/rho) + t (sigma_min^(1/rho) - sigma_max^(1/rho)))^rho,
/// decreasing from sigma_max at t = 0 to sigma_min at t = 1.
struct NoiseLevelParams {
  double sigma_data = 16.0;
  double sigma_max = 160.0;
  double sigma_min = 4e-4;
  double rho = 7.0;

  // sigma_max/sigma_min scaled with sigma_data relative to the reference value 16.
  static NoiseLevelParams for_sigma_data(double sigma_data);
  void validate() const;
};

struct ChurnParams {
  double gamma0 = 0.8;
  double gamma_min = 1.0;
  double noise_scale = 1.003;  // lambda, applied by the sampler
  void validate() const;
};

enum class TimeDistKind { beta, uniform };

struct TimeDist {
  TimeDistKind kind = TimeDistKind::beta;
  double alpha = 2.5;
  double beta = 2.5;
  void validate() const;
};

double sigma_at(double t, const NoiseLevelParams& p);

// d sigma / d t, used only for diagnostics and tests.
double dsigma_dt(double t, const NoiseLevelParams& p);

// The t in [0, 1] with sigma_at(t) = sigma, by monotone bisection; sigma above
// sigma_max maps to 0 and below sigma_min maps to 1.
double time_at_sigma(double sigma, const NoiseLevelParams& p);

// [0, 1/n, ..., 1]; entries computed as i/n so the last is exactly 1.
std::vector<double> step_schedule(int n_steps);

struct ChurnResult {
  Coords noise;        // epsilon_t, before the lambda scaling
  double t_hat = 0.0;  // time whose noise level is sigma_hat
  double sigma = 0.0;
  double sigma_hat = 0.0;
};

/// Stochastic re-noising at time t. With gamma0 = 0, or sigma(t) <= gamma_min,
/// the noise is exactly zero, t_hat == t, and rng is not touched.
ChurnResult churn(double t, double dt, int n_atoms, const ChurnParams& c, const NoiseLevelParams& p,
                  RngStream& rng);

double sample_time(const TimeDist& d, RngStream& rng);

}  // namespace fewstep
