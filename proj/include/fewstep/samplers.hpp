#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fewstep/denoiser.hpp"
#include "fewstep/geometry.hpp"
#include "fewstep/schedules.hpp"

namespace fewstep {

enum class SamplerMode { af3, ode };

std::string_view to_string(SamplerMode m);
SamplerMode parse_sampler_mode(std::string_view s);

struct SamplerConfig {
  SamplerMode mode = SamplerMode::ode;
  int n_steps = 2;
  // One entry broadcasts; otherwise one entry per step.
  std::vector<double> eta{1.0};
  ChurnParams churn{0.0, 1.0, 1.0};
  NoiseLevelParams noise;
  // Per-coordinate std of x0; unset means sigma_max (the level at t = 0).
  std::optional<double> init_std;
  bool augment = true;
  AugmentationConfig augmentation;
  RngStream init_rng{0, 0};
  RngStream churn_rng{0, 1};
  RngStream augment_rng{0, 2};

  // AF3 defaults: eta 1.5, gamma0 0.8, gamma_min 1, lambda 1.003.
  static SamplerConfig af3_default(int n_steps);
  // eta 1, gamma0 0, lambda 1.
  static SamplerConfig ode_default(int n_steps);

  void validate() const;
  double eta_at(int step) const;
  double initial_std() const;
  // Reseeds the three streams from a master seed and cell index.
  void seed_streams(std::uint64_t seed, std::uint64_t cell);
};

struct StepRecord {
  int step = 0;
  double t = 0.0;       // at step start, i / n
  double t_hat = 0.0;   // after churn
  double sigma_hat = 0.0;
  double t_next = 0.0;  // (i + 1) / n
  double eta = 1.0;
  Coords x_t;       // after augmentation
  Coords x_noisy;   // x_t + lambda eps
  Coords x_denoised;
};

struct Trajectory {
  Coords x_init;
  std::vector<StepRecord> steps;
  Structure final_structure;
};

/// Update direction for a denoised estimate. EDM (x-pred): (x_noisy - x_denoised) / sigma_hat,
/// per unit noise level. Flow (v-pred): (x_denoised - x_noisy) / (1 - t_hat), per unit time.
Coords cal_velocity(const Coords& x_denoised, const Coords& x_noisy, NoiseTime t_hat, Parameterization param);

/// Length of the step from t_hat to t_next in the units of cal_velocity: sigma(t_next) - sigma_hat
/// for x-pred, t_next - t_hat for v-pred.
double step_span(NoiseTime t_hat, double t_next, Parameterization param, const NoiseLevelParams& noise);

// x + (eta * span) v, shared by both samplers.
Coords euler_update(const Coords& x, double eta, double span, const Coords& v);

Coords initial_sample(int n_atoms, const SamplerConfig& cfg, RngStream& rng);

/// AF3-style stochastic sampler (augment, churn, denoise, eta-scaled Euler update).
Trajectory af3_sample(const Denoiser& d, const Condition& c, const Structure& layout, SamplerConfig cfg,
                      const std::optional<Coords>& x_init = std::nullopt);

/// Deterministic probability-flow sampler; no noise is injected.
Trajectory ode_sample(const Denoiser& d, const Condition& c, const Structure& layout, SamplerConfig cfg,
                      const std::optional<Coords>& x_init = std::nullopt);

// Dispatches on cfg.mode.
Trajectory sample(const Denoiser& d, const Condition& c, const Structure& layout, const SamplerConfig& cfg);

/// n_seeds x n_samples grid; cell (i, j) uses streams derived from (master_seed, i * n_samples + j).
/// Cells run on up to `workers` threads; the result does not depend on the worker count.
std::vector<std::vector<Structure>> batch_sample(const Denoiser& d, const Condition& c, const Structure& layout,
                                                 const SamplerConfig& cfg, int n_seeds, int n_samples,
                                                 std::uint64_t master_seed, int workers = 1);

// One JSON object per step: t, t_hat, sigma_hat, t_next, eta, norms, optional coordinates.
std::string trajectory_jsonl(const Trajectory& traj, bool with_coords = false);

}  // namespace fewstep
