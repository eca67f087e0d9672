#include "fewstep/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fewstep {

NoiseLevelParams NoiseLevelParams::for_sigma_data(double sigma_data) {
  NoiseLevelParams p;
  p.sigma_data = sigma_data;
  p.sigma_max = 160.0 * sigma_data / 16.0;
  p.sigma_min = 4e-4 * sigma_data / 16.0;
  return p;
}

void NoiseLevelParams::validate() const {
  if (!(sigma_data > 0.0)) throw ValidationError("sigma_data must be positive");
  if (!(sigma_min >= 0.0) || !(sigma_min < sigma_max) || !std::isfinite(sigma_max)) {
    throw ValidationError("need 0 <= sigma_min < sigma_max");
  }
  if (!(rho > 0.0)) throw ValidationError("rho must be positive");
}

void ChurnParams::validate() const {
  if (!(gamma0 >= 0.0)) throw ValidationError("gamma0 must be >= 0");
  if (!(noise_scale > 0.0)) throw ValidationError("lambda must be positive");
}

void TimeDist::validate() const {
  if (kind == TimeDistKind::beta && (!(alpha > 0.0) || !(beta > 0.0))) {
    throw ValidationError("beta time distribution needs positive parameters");
  }
}

double sigma_at(double t, const NoiseLevelParams& p) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("sigma_at: t = " + std::to_string(t) + " outside [0, 1]");
  const double inv = 1.0 / p.rho;
  const double hi = std::pow(p.sigma_max, inv);
  const double lo = std::pow(p.sigma_min, inv);
  if (t == 0.0) return p.sigma_max;
  if (t == 1.0) return p.sigma_min;
  return std::pow(hi + t * (lo - hi), p.rho);
}

double dsigma_dt(double t, const NoiseLevelParams& p) {
  const double inv = 1.0 / p.rho;
  const double hi = std::pow(p.sigma_max, inv);
  const double lo = std::pow(p.sigma_min, inv);
  return p.rho * std::pow(hi + t * (lo - hi), p.rho - 1.0) * (lo - hi);
}

double time_at_sigma(double sigma, const NoiseLevelParams& p) {
  if (sigma >= p.sigma_max) return 0.0;
  if (sigma <= p.sigma_min) return 1.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (sigma_at(mid, p) > sigma) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> step_schedule(int n_steps) {
  if (n_steps < 1) throw ValidationError("step_schedule: n_steps must be >= 1");
  std::vector<double> times(static_cast<std::size_t>(n_steps) + 1);
  for (int i = 0; i <= n_steps; ++i) times[static_cast<std::size_t>(i)] = static_cast<double>(i) / n_steps;
  return times;
}

ChurnResult churn(double t, double /*dt*/, int n_atoms, const ChurnParams& c, const NoiseLevelParams& p,
                  RngStream& rng) {
  ChurnResult out;
  out.noise = Coords::Zero(n_atoms, 3);
  out.sigma = sigma_at(t, p);
  const double gamma = out.sigma > c.gamma_min ? c.gamma0 : 0.0;
  if (gamma == 0.0) {
    out.t_hat = t;
    out.sigma_hat = out.sigma;
    return out;
  }
  out.sigma_hat = out.sigma * (1.0 + gamma);
  // sigma_hat above sigma_max has no time on [0, 1]; the clamp pins it to t = 0.
  out.t_hat = std::min(t, time_at_sigma(out.sigma_hat, p));
  const double std = std::sqrt(std::max(out.sigma_hat * out.sigma_hat - out.sigma * out.sigma, 0.0));
  for (int i = 0; i < n_atoms; ++i) {
    for (int k = 0; k < 3; ++k) out.noise(i, k) = std * rng.normal();
  }
  return out;
}

double sample_time(const TimeDist& d, RngStream& rng) {
  if (d.kind == TimeDistKind::uniform) return rng.uniform();
  return rng.beta(d.alpha, d.beta);
}

}  // namespace fewstep
