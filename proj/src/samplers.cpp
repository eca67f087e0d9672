#include "fewstep/samplers.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace fewstep {

std::string_view to_string(SamplerMode m) { return m == SamplerMode::af3 ? "af3" : "ode"; }

SamplerMode parse_sampler_mode(std::string_view s) {
  if (s == "af3") return SamplerMode::af3;
  if (s == "ode") return SamplerMode::ode;
  throw ValidationError("unknown sampler mode '" + std::string(s) + "'");
}

SamplerConfig SamplerConfig::af3_default(int n_steps) {
  SamplerConfig c;
  c.mode = SamplerMode::af3;
  c.n_steps = n_steps;
  c.eta = {1.5};
  c.churn = ChurnParams{0.8, 1.0, 1.003};
  return c;
}

SamplerConfig SamplerConfig::ode_default(int n_steps) {
  SamplerConfig c;
  c.mode = SamplerMode::ode;
  c.n_steps = n_steps;
  c.eta = {1.0};
  c.churn = ChurnParams{0.0, 1.0, 1.0};
  return c;
}

void SamplerConfig::validate() const {
  if (n_steps < 1) throw ValidationError("sampler: n_steps must be >= 1");
  if (eta.empty() || (eta.size() != 1 && static_cast<int>(eta.size()) != n_steps)) {
    throw ValidationError("sampler: eta must be a scalar or one entry per step (" + std::to_string(n_steps) + ")");
  }
  for (double e : eta) {
    if (!(e > 0.0)) throw ValidationError("sampler: eta entries must be positive");
  }
  churn.validate();
  noise.validate();
  if (init_std && !(*init_std > 0.0)) throw ValidationError("sampler: init_std must be positive");
  if (!(augmentation.translation_std >= 0.0)) throw ValidationError("sampler: translation std must be >= 0");
}

double SamplerConfig::eta_at(int step) const {
  return eta.size() == 1 ? eta[0] : eta[static_cast<std::size_t>(step)];
}

double SamplerConfig::initial_std() const { return init_std ? *init_std : noise.sigma_max; }

void SamplerConfig::seed_streams(std::uint64_t seed, std::uint64_t cell) {
  init_rng = RngStream(seed, 3 * cell);
  churn_rng = RngStream(seed, 3 * cell + 1);
  augment_rng = RngStream(seed, 3 * cell + 2);
}

Coords cal_velocity(const Coords& x_denoised, const Coords& x_noisy, NoiseTime t_hat, Parameterization param) {
  if (x_denoised.rows() != x_noisy.rows()) throw ValidationError("cal_velocity: shape mismatch");
  if (param == Parameterization::x_pred) {
    if (!(t_hat.sigma > 0.0)) throw DomainError("cal_velocity: noise level is zero");
    return (x_noisy - x_denoised) / t_hat.sigma;
  }
  if (!(t_hat.t < 1.0)) throw DomainError("cal_velocity: t_hat = 1");
  return (x_denoised - x_noisy) / (1.0 - t_hat.t);
}

double step_span(NoiseTime t_hat, double t_next, Parameterization param, const NoiseLevelParams& noise) {
  if (param == Parameterization::x_pred) return sigma_at(t_next, noise) - t_hat.sigma;
  return t_next - t_hat.t;
}

Coords euler_update(const Coords& x, double eta, double span, const Coords& v) { return x + (eta * span) * v; }

Coords initial_sample(int n_atoms, const SamplerConfig& cfg, RngStream& rng) {
  const double s = cfg.initial_std();
  Coords x(n_atoms, 3);
  for (int i = 0; i < n_atoms; ++i) {
    for (int k = 0; k < 3; ++k) x(i, k) = s * rng.normal();
  }
  return x;
}

namespace {

void require_finite(const Coords& x, int step, const char* what) {
  if (!x.allFinite()) {
    throw NumericalError("sampler: non-finite " + std::string(what) + " at step " + std::to_string(step));
  }
}

Coords start(const Structure& layout, SamplerConfig& cfg, const std::optional<Coords>& x_init) {
  if (x_init) {
    if (x_init->rows() != layout.size()) throw ValidationError("sampler: x_init atom count mismatch");
    return *x_init;
  }
  return initial_sample(layout.size(), cfg, cfg.init_rng);
}

}  // namespace

Trajectory af3_sample(const Denoiser& d, const Condition& c, const Structure& layout, SamplerConfig cfg,
                      const std::optional<Coords>& x_init) {
  cfg.validate();
  if (cfg.mode != SamplerMode::af3) throw ValidationError("af3_sample: config mode is not af3");
  const auto param = d.parameterization();
  const auto times = step_schedule(cfg.n_steps);
  Trajectory traj;
  Coords x = start(layout, cfg, x_init);
  traj.x_init = x;
  for (int i = 0; i < cfg.n_steps; ++i) {
    const double t = times[static_cast<std::size_t>(i)];
    const double t_next = times[static_cast<std::size_t>(i) + 1];
    StepRecord rec;
    rec.step = i;
    rec.t = t;
    rec.t_next = t_next;
    rec.eta = cfg.eta_at(i);
    if (cfg.augment) x = center_random_augmentation(x, cfg.augment_rng, cfg.augmentation);
    const ChurnResult ch = churn(t, t_next - t, layout.size(), cfg.churn, cfg.noise, cfg.churn_rng);
    const NoiseTime nt{ch.t_hat, ch.sigma_hat};
    Coords x_noisy = x + cfg.churn.noise_scale * ch.noise;
    require_finite(x_noisy, i, "x_noisy");
    Coords x_den = d.denoise(x_noisy, nt, c);
    require_finite(x_den, i, "x_denoised");
    const Coords v = cal_velocity(x_den, x_noisy, nt, param);
    const Coords next = euler_update(x_noisy, rec.eta, step_span(nt, t_next, param, cfg.noise), v);
    require_finite(next, i, "x_t");
    rec.t_hat = nt.t;
    rec.sigma_hat = nt.sigma;
    rec.x_t = std::move(x);
    rec.x_noisy = std::move(x_noisy);
    rec.x_denoised = std::move(x_den);
    traj.steps.push_back(std::move(rec));
    x = next;
  }
  traj.final_structure = layout.with_coords(std::move(x));
  return traj;
}

Trajectory ode_sample(const Denoiser& d, const Condition& c, const Structure& layout, SamplerConfig cfg,
                      const std::optional<Coords>& x_init) {
  cfg.validate();
  if (cfg.mode != SamplerMode::ode) throw ValidationError("ode_sample: config mode is not ode");
  const auto param = d.parameterization();
  const auto times = step_schedule(cfg.n_steps);
  Trajectory traj;
  Coords x = start(layout, cfg, x_init);
  traj.x_init = x;
  for (int i = 0; i < cfg.n_steps; ++i) {
    const double t = times[static_cast<std::size_t>(i)];
    const double t_next = times[static_cast<std::size_t>(i) + 1];
    StepRecord rec;
    rec.step = i;
    rec.t = t;
    rec.t_next = t_next;
    rec.eta = cfg.eta_at(i);
    if (cfg.augment) x = center_random_augmentation(x, cfg.augment_rng, cfg.augmentation);
    const NoiseTime nt = noise_time(t, cfg.noise);
    Coords x_den = d.denoise(x, nt, c);
    require_finite(x_den, i, "x_denoised");
    const Coords v = cal_velocity(x_den, x, nt, param);
    const Coords next = euler_update(x, rec.eta, step_span(nt, t_next, param, cfg.noise), v);
    require_finite(next, i, "x_t");
    rec.t_hat = nt.t;
    rec.sigma_hat = nt.sigma;
    rec.x_t = x;
    rec.x_noisy = std::move(x);
    rec.x_denoised = std::move(x_den);
    traj.steps.push_back(std::move(rec));
    x = next;
  }
  traj.final_structure = layout.with_coords(std::move(x));
  return traj;
}

Trajectory sample(const Denoiser& d, const Condition& c, const Structure& layout, const SamplerConfig& cfg) {
  return cfg.mode == SamplerMode::af3 ? af3_sample(d, c, layout, cfg) : ode_sample(d, c, layout, cfg);
}

std::vector<std::vector<Structure>> batch_sample(const Denoiser& d, const Condition& c, const Structure& layout,
                                                 const SamplerConfig& cfg, int n_seeds, int n_samples,
                                                 std::uint64_t master_seed, int workers) {
  if (n_seeds < 1 || n_samples < 1) throw ValidationError("batch_sample: counts must be >= 1");
  cfg.validate();
  std::vector<std::vector<Structure>> grid(static_cast<std::size_t>(n_seeds),
                                           std::vector<Structure>(static_cast<std::size_t>(n_samples)));
  const int total = n_seeds * n_samples;
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto run = [&] {
    for (int cell = next++; cell < total; cell = next++) {
      try {
        SamplerConfig local = cfg;
        local.seed_streams(master_seed, static_cast<std::uint64_t>(cell));
        grid[static_cast<std::size_t>(cell / n_samples)][static_cast<std::size_t>(cell % n_samples)] =
            sample(d, c, layout, local).final_structure;
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min(workers, total));
  if (n_threads == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return grid;
}

std::string trajectory_jsonl(const Trajectory& traj, bool with_coords) {
  std::string out;
  auto coords_json = [](const Coords& x) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < x.rows(); ++i) arr.push_back({x(i, 0), x(i, 1), x(i, 2)});
    return arr;
  };
  for (const auto& r : traj.steps) {
    nlohmann::json j;
    j["step"] = r.step;
    j["t"] = r.t;
    j["t_hat"] = r.t_hat;
    j["sigma_hat"] = r.sigma_hat;
    j["t_next"] = r.t_next;
    j["eta"] = r.eta;
    j["norm_x_t"] = r.x_t.norm();
    j["norm_x_noisy"] = r.x_noisy.norm();
    j["norm_x_denoised"] = r.x_denoised.norm();
    if (with_coords) {
      j["x_t"] = coords_json(r.x_t);
      j["x_noisy"] = coords_json(r.x_noisy);
      j["x_denoised"] = coords_json(r.x_denoised);
    }
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace fewstep
