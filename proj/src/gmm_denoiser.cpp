#include "fewstep/gmm_denoiser.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace fewstep {

Coords gmm_posterior_mean(const Coords& x, double sigma, const GaussianMixture& mix) {
  if (!(sigma >= 0.0)) throw ValidationError("gmm_posterior_mean: sigma must be >= 0");
  if (sigma == 0.0) return x;
  const auto& comps = mix.components;
  const double s2 = sigma * sigma;
  Coords out(x.rows(), 3);
  std::vector<double> logr(comps.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vec3 xi = x.row(i).transpose();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const double var = comps[k].std * comps[k].std + s2;
      logr[k] = comps[k].weight > 0.0
                    ? std::log(comps[k].weight) - 1.5 * std::log(var) - 0.5 * (xi - comps[k].mean).squaredNorm() / var
                    : -std::numeric_limits<double>::infinity();
      best = std::max(best, logr[k]);
    }
    double z = 0.0;
    Vec3 acc = Vec3::Zero();
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const double r = std::exp(logr[k] - best);
      const double a2 = comps[k].std * comps[k].std;
      acc += r * (comps[k].mean + a2 / (a2 + s2) * (xi - comps[k].mean));
      z += r;
    }
    out.row(i) = (acc / z).transpose();
  }
  return out;
}

GmmDenoiser::GmmDenoiser(GaussianMixture mix, Parameterization param, double init_std)
    : mix_(std::move(mix)), param_(param), init_std_(init_std) {
  mix_.validate();
  if (!(init_std_ > 0.0)) throw ValidationError("GmmDenoiser: init_std must be positive");
}

Coords GmmDenoiser::predict(const Coords& x, NoiseTime nt, const Condition& /*c*/) const {
  if (param_ == Parameterization::x_pred) return gmm_posterior_mean(x, nt.sigma, mix_);
  const double t = nt.t;
  if (!(t < 1.0)) throw DomainError("GmmDenoiser: velocity undefined at t = 1");
  Coords x1;
  if (t <= 0.0) {
    Vec3 mean = Vec3::Zero();
    for (const auto& c : mix_.components) mean += c.weight * c.mean;
    x1 = Coords(x.rows(), 3);
    x1.rowwise() = mean.transpose();
  } else {
    // x_t / t = x1 + ((1 - t) / t) x0 is an EDM observation at sigma = (1 - t) init_std / t.
    x1 = gmm_posterior_mean(x / t, (1.0 - t) * init_std_ / t, mix_);
  }
  return (x1 - x) / (1.0 - t);
}

}  // namespace fewstep
