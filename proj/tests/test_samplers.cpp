#include <gtest/gtest.h>

#include <cmath>

#include "fewstep/gmm_denoiser.hpp"
#include "fewstep/residual_net.hpp"
#include "fewstep/samplers.hpp"
#include "test_support.hpp"

using namespace fewstep;

namespace {

GaussianMixture single(double a) {
  GaussianMixture m;
  m.components = {GmmComponent{1.0, Vec3::Zero(), a}};
  return m;
}

// Velocity field that is constant: v = c.
class ConstantVelocity final : public Denoiser {
 public:
  explicit ConstantVelocity(Vec3 c) : c_(c) {}
  Parameterization parameterization() const override { return Parameterization::v_pred; }
  Coords predict(const Coords& x, NoiseTime, const Condition&) const override {
    Coords v(x.rows(), 3);
    v.rowwise() = c_.transpose();
    return v;
  }

 private:
  Vec3 c_;
};

class NanAfter final : public Denoiser {
 public:
  explicit NanAfter(double t) : t_(t) {}
  Parameterization parameterization() const override { return Parameterization::x_pred; }
  Coords predict(const Coords& x, NoiseTime nt, const Condition&) const override {
    return nt.t >= t_ ? Coords::Constant(x.rows(), 3, std::nan("")) : Coords(0.5 * x);
  }

 private:
  double t_;
};

bool same_trajectory(const Trajectory& a, const Trajectory& b) {
  if (a.steps.size() != b.steps.size() || a.x_init != b.x_init) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto &p = a.steps[i], &q = b.steps[i];
    if (p.t != q.t || p.t_hat != q.t_hat || p.sigma_hat != q.sigma_hat || p.t_next != q.t_next || p.eta != q.eta ||
        p.x_t != q.x_t || p.x_noisy != q.x_noisy || p.x_denoised != q.x_denoised) {
      return false;
    }
  }
  return a.final_structure == b.final_structure;
}

// Euler product for D(x) = k(sigma) x with k = a^2 / (a^2 + sigma^2), in sigma.
double euler_ratio_oracle(double a, int n, const NoiseLevelParams& p) {
  auto sig = [&](double t) {
    const double hi = std::pow(p.sigma_max, 1 / p.rho), lo = std::pow(p.sigma_min, 1 / p.rho);
    return std::pow(hi + t * (lo - hi), p.rho);
  };
  double r = 1.0;
  for (int i = 0; i < n; ++i) {
    const double s = sig(static_cast<double>(i) / n), s1 = sig(static_cast<double>(i + 1) / n);
    const double k = a * a / (a * a + s * s);
    r *= 1.0 + (s1 - s) * (1.0 - k) / s;
  }
  return r;
}

NoiseLevelParams analytic_noise() {
  NoiseLevelParams p;
  p.sigma_data = 1.0;
  p.sigma_max = 16.0;
  p.sigma_min = 4e-4 / 16.0;
  return p;
}

}  // namespace

TEST(Velocity, Examples) {
  RngStream rng(1, 0);
  const Coords x = support::random_coords(3, 2.0, rng);
  EXPECT_TRUE((cal_velocity(x, x, NoiseTime{0.3, 2.0}, Parameterization::x_pred).array() == 0).all());
  EXPECT_TRUE((cal_velocity(x, x, NoiseTime{0.3, 2.0}, Parameterization::v_pred).array() == 0).all());
  Coords noisy(1, 3), den(1, 3);
  noisy << 2, 0, 0;
  den << 0, 0, 0;
  EXPECT_EQ(cal_velocity(den, noisy, NoiseTime{0.5, 1.0}, Parameterization::x_pred)(0, 0), 2.0);
  Coords xt = Coords::Zero(1, 3), target(1, 3);
  target << 1, 0, 0;
  const Coords v = cal_velocity(target, xt, NoiseTime{0.5, 0.0}, Parameterization::v_pred);
  EXPECT_EQ(v(0, 0), 2.0);
  EXPECT_EQ(v(0, 1), 0.0);
  EXPECT_THROW(cal_velocity(target, xt, NoiseTime{1.0, 0.0}, Parameterization::v_pred), DomainError);
  EXPECT_THROW(cal_velocity(target, xt, NoiseTime{0.5, 0.0}, Parameterization::x_pred), DomainError);
}

TEST(Velocity, FixedPointUpdateIsNoOp) {
  RngStream rng(2, 0);
  const Coords x = support::random_coords(4, 2.0, rng);
  const Coords v = cal_velocity(x, x, NoiseTime{0.2, 5.0}, Parameterization::x_pred);
  EXPECT_EQ(euler_update(x, 1.5, -3.0, v), x);
}

TEST(Sampler, DegenerateAf3EqualsOdeBitwise) {
  const GmmDenoiser g(single(1.0));
  NetSpec spec;
  spec.n_blocks = 2;
  spec.hidden = 8;
  spec.time_embed = 4;
  for (int seed = 0; seed < 20; ++seed) {
    RngStream init(seed, 7);
    const NetParams p = init_params(spec, init);
    const NetDenoiser nd(p);
    const Denoiser& d = seed % 2 ? static_cast<const Denoiser&>(g) : nd;
    SamplerConfig ode = SamplerConfig::ode_default(1 + seed % 6);
    ode.seed_streams(seed, 0);
    SamplerConfig af3 = ode;
    af3.mode = SamplerMode::af3;
    const Structure layout = make_structure(Coords::Zero(5, 3));
    EXPECT_TRUE(same_trajectory(af3_sample(d, Condition{}, layout, af3), ode_sample(d, Condition{}, layout, ode)));
  }
}

TEST(Sampler, AnalyticEndpointMatchesEulerOracleAndClosedForm) {
  const NoiseLevelParams p = analytic_noise();
  const GmmDenoiser d(single(1.0));
  const Structure layout = make_structure(Coords::Zero(3, 3));
  for (int n : {2, 200, 512}) {
    SamplerConfig cfg = SamplerConfig::ode_default(n);
    cfg.noise = p;
    cfg.augment = false;
    cfg.seed_streams(5, 0);
    const Trajectory tr = ode_sample(d, Condition{}, layout, cfg);
    const double ratio = tr.final_structure.coords.norm() / tr.x_init.norm();
    EXPECT_NEAR(ratio, euler_ratio_oracle(1.0, n, p), 1e-12);
  }
  // Against the continuous solution the Euler gap is first order in 1/n.
  const double exact = std::sqrt((1.0 + p.sigma_min * p.sigma_min) / (1.0 + p.sigma_max * p.sigma_max));
  const double g256 = std::abs(euler_ratio_oracle(1.0, 256, p) - exact);
  const double g512 = std::abs(euler_ratio_oracle(1.0, 512, p) - exact);
  EXPECT_GT(g256 / g512, 1.5);
  EXPECT_LT(g256 / g512, 2.5);
  EXPECT_LT(g512, 1e-3);
}

TEST(Sampler, OneStepConstantVelocityIsExact) {
  const Vec3 c(3.0, -1.0, 2.0);
  const ConstantVelocity d(c);
  SamplerConfig cfg = SamplerConfig::ode_default(1);
  cfg.augment = false;
  RngStream rng(3, 0);
  const Coords x0 = support::random_coords(4, 10.0, rng);
  const Trajectory tr = ode_sample(d, Condition{}, make_structure(Coords::Zero(4, 3)), cfg, x0);
  Coords x1 = x0;
  x1.rowwise() += c.transpose();
  EXPECT_LT((tr.final_structure.coords - x1).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Sampler, PerStepEtaScheduleRecorded) {
  const GmmDenoiser d(single(1.0));
  SamplerConfig cfg = SamplerConfig::ode_default(10);
  cfg.eta = {1, 1, 1, 1, 1, 1.5, 1.5, 1.5, 1.5, 1.5};
  cfg.noise = analytic_noise();
  const Trajectory tr = ode_sample(d, Condition{}, make_structure(Coords::Zero(3, 3)), cfg);
  ASSERT_EQ(tr.steps.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(tr.steps[static_cast<std::size_t>(i)].eta, i < 5 ? 1.0 : 1.5);
  EXPECT_EQ(tr.steps.back().t_next, 1.0);
  cfg.eta = {1.0, 1.5};
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Sampler, RotationEquivarianceWithIsotropicOracle) {
  const GmmDenoiser d(single(2.0));
  SamplerConfig cfg = SamplerConfig::ode_default(8);
  cfg.augment = false;
  cfg.noise = analytic_noise();
  RngStream rng(4, 0);
  const Coords x0 = support::random_coords(5, 16.0, rng);
  const Mat3 r = random_rotation(rng);
  const Structure layout = make_structure(Coords::Zero(5, 3));
  const Trajectory a = ode_sample(d, Condition{}, layout, cfg, x0);
  const Trajectory b = ode_sample(d, Condition{}, layout, cfg, Coords(x0 * r.transpose()));
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_LT((a.steps[i].x_denoised * r.transpose() - b.steps[i].x_denoised).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_LT((a.final_structure.coords * r.transpose() - b.final_structure.coords).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Sampler, NanAbortsWithStepIndex) {
  const NanAfter d(0.5);
  SamplerConfig cfg = SamplerConfig::ode_default(4);
  try {
    ode_sample(d, Condition{}, make_structure(Coords::Zero(2, 3)), cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos) << e.what();
  }
}

TEST(Sampler, AugmentationOnForBothModesByDefault) {
  EXPECT_TRUE(SamplerConfig::ode_default(2).augment);
  EXPECT_TRUE(SamplerConfig::af3_default(2).augment);
  const SamplerConfig af3 = SamplerConfig::af3_default(2);
  EXPECT_EQ(af3.eta_at(0), 1.5);
  EXPECT_EQ(af3.churn.gamma0, 0.8);
  EXPECT_EQ(af3.churn.noise_scale, 1.003);
  EXPECT_EQ(af3.initial_std(), af3.noise.sigma_max);
}

TEST(Sampler, ChurnTrajectoryCarriesLiftedSigma) {
  const GmmDenoiser d(single(16.0));
  SamplerConfig cfg = SamplerConfig::af3_default(2);
  cfg.seed_streams(1, 0);
  const Trajectory tr = af3_sample(d, Condition{}, make_structure(Coords::Zero(4, 3)), cfg);
  EXPECT_NEAR(tr.steps[0].sigma_hat, 1.8 * 160.0, 1e-9);
  EXPECT_EQ(tr.steps[0].t_hat, 0.0);
}

TEST(BatchSample, GridShapeDistinctAndDeterministic) {
  const GmmDenoiser d(single(1.0));
  SamplerConfig cfg = SamplerConfig::ode_default(3);
  cfg.noise = analytic_noise();
  const Structure layout = make_structure(Coords::Zero(3, 3));
  const auto g = batch_sample(d, Condition{}, layout, cfg, 5, 5, 42, 1);
  ASSERT_EQ(g.size(), 5u);
  for (const auto& row : g) ASSERT_EQ(row.size(), 5u);
  for (int i = 0; i < 25; ++i) {
    for (int j = i + 1; j < 25; ++j) {
      EXPECT_FALSE(g[static_cast<std::size_t>(i / 5)][static_cast<std::size_t>(i % 5)] ==
                   g[static_cast<std::size_t>(j / 5)][static_cast<std::size_t>(j % 5)]);
    }
  }
  EXPECT_EQ(g, batch_sample(d, Condition{}, layout, cfg, 5, 5, 42, 1));
  EXPECT_EQ(g, batch_sample(d, Condition{}, layout, cfg, 5, 5, 42, 4));
}

TEST(BatchSample, SingleCellMatchesDirectCall) {
  const GmmDenoiser d(single(1.0));
  SamplerConfig cfg = SamplerConfig::ode_default(4);
  const Structure layout = make_structure(Coords::Zero(3, 3));
  const auto g = batch_sample(d, Condition{}, layout, cfg, 1, 1, 9, 1);
  SamplerConfig direct = cfg;
  direct.seed_streams(9, 0);
  EXPECT_EQ(g[0][0], ode_sample(d, Condition{}, layout, direct).final_structure);
}

TEST(Trajectory, JsonlOneLinePerStep) {
  const GmmDenoiser d(single(1.0));
  SamplerConfig cfg = SamplerConfig::ode_default(3);
  const Trajectory tr = ode_sample(d, Condition{}, make_structure(Coords::Zero(2, 3)), cfg);
  const std::string s = trajectory_jsonl(tr);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
  EXPECT_NE(s.find("\"t_next\""), std::string::npos);
}
