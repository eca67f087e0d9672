#pragma once

#include "fewstep/denoiser.hpp"
#include "fewstep/toy.hpp"

namespace fewstep {

/// Exact E[x1 | x1 + sigma * eps = x] per atom for an isotropic Gaussian mixture.
Coords gmm_posterior_mean(const Coords& x, double sigma, const GaussianMixture& mix);

/// Analytic denoiser backed by gmm_posterior_mean.
///
/// x-pred: the EDM posterior mean at noise level sigma.
/// v-pred: the exact marginal velocity of the straight path
/// x_t = (1 - t) x0 + t x1 with x0 ~ N(0, init_std^2 I).
class GmmDenoiser final : public Denoiser {
 public:
  GmmDenoiser(GaussianMixture mix, Parameterization param = Parameterization::x_pred, double init_std = 16.0);

  Parameterization parameterization() const override { return param_; }
  Coords predict(const Coords& x, NoiseTime nt, const Condition& c) const override;

  const GaussianMixture& mixture() const { return mix_; }

 private:
  GaussianMixture mix_;
  Parameterization param_;
  double init_std_;
};

}  // namespace fewstep
