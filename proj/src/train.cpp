#include "fewstep/train.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "fewstep/geometry.hpp"
#include "fewstep/metrics.hpp"
#include "fewstep/samplers.hpp"

namespace fewstep {

namespace {

// Stream ids under TrainConfig::seed.
constexpr std::uint64_t kInitStream = 100;
constexpr std::uint64_t kDataStream = 101;
constexpr std::uint64_t kTimeStream = 102;
constexpr std::uint64_t kNoiseStream = 103;
constexpr std::uint64_t kPathwayStream = 104;

template <class F>
void zip_tensors(NetParams& a, const NetParams& b, F&& f) {
  std::vector<const Eigen::MatrixXd*> bm;
  std::vector<const Eigen::VectorXd*> bv;
  b.for_each_tensor([&](const std::string&, const auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::MatrixXd>) {
      bm.push_back(&t);
    } else {
      bv.push_back(&t);
    }
  });
  std::size_t im = 0, iv = 0;
  a.for_each_tensor([&](const std::string&, auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::MatrixXd>) {
      f(t.array(), bm[im++]->array());
    } else {
      f(t.array(), bv[iv++]->array());
    }
  });
}

class Adam {
 public:
  explicit Adam(const NetParams& p) : m_(zeros_like(p)), v_(zeros_like(p)) {}

  void step(NetParams& p, const NetParams& g, const TrainConfig& cfg) {
    ++t_;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
    zip_tensors(m_, g, [&](auto m, auto gg) { m = b1 * m + (1.0 - b1) * gg; });
    zip_tensors(v_, g, [&](auto v, auto gg) { v = b2 * v + (1.0 - b2) * gg.square(); });
    // p -= lr * mhat / (sqrt(vhat) + eps), walking the three parameter sets in lockstep.
    NetParams upd = zeros_like(p);
    zip_tensors(upd, m_, [&](auto u, auto m) { u = m / c1; });
    zip_tensors(upd, v_, [&](auto u, auto v) { u = u / ((v / c2).sqrt() + cfg.adam_eps); });
    zip_tensors(p, upd, [&](auto w, auto u) { w -= cfg.lr * u; });
  }

 private:
  NetParams m_, v_;
  int t_ = 0;
};

double output_scale_sq(const NetSpec& spec, NoiseTime nt) {
  if (spec.param == Parameterization::x_pred) {
    const double c = edm_precond(nt.sigma, spec.noise.sigma_data).c_out;
    return c * c;
  }
  return spec.init_std * spec.init_std + spec.noise.sigma_data * spec.noise.sigma_data;
}

}  // namespace

std::string_view to_string(Framework f) { return f == Framework::edm ? "edm" : "flow"; }

Framework parse_framework(std::string_view s) {
  if (s == "edm") return Framework::edm;
  if (s == "flow") return Framework::flow;
  throw ValidationError("unknown framework '" + std::string(s) + "' (expected edm or flow)");
}

std::string_view to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(std::string_view s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  throw ValidationError("unknown optimizer '" + std::string(s) + "' (expected sgd or adam)");
}

Parameterization parameterization_for(Framework f) {
  return f == Framework::edm ? Parameterization::x_pred : Parameterization::v_pred;
}

ToyData::ToyData(ToySpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  RngStream rng(seed, 0);
  reference_ = gen_toy(spec_, rng);
}

Structure ToyData::draw(const Coords&, RngStream& rng) const {
  if (spec_.kind == ToyKind::gmm) return gen_toy(spec_, rng);
  Structure s = perturb(reference_, spec_.jitter, rng);
  const Vec3 c = centroid(s.coords);
  s.coords.rowwise() -= c.transpose();
  return s;
}

void EvalSpec::validate() const {
  if (n_samples < 1) throw ValidationError("eval: n_samples must be >= 1");
  if (n_steps < 1) throw ValidationError("eval: n_steps must be >= 1");
}

void TrainConfig::validate() const {
  if (batch < 1) throw ValidationError("train: batch must be >= 1");
  if (iterations < 0) throw ValidationError("train: iterations must be >= 0");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("train: lr must be finite and >= 0");
  if (!(pathway_mix >= 0.0 && pathway_mix <= 1.0)) throw ValidationError("train: pathway_mix must be in [0, 1]");
  if (eval_every < 0) throw ValidationError("train: eval_every must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0)) {
    throw ValidationError("train: invalid adam settings");
  }
  time_dist.validate();
  loss.validate();
  eval.validate();
}

TrainingDiverged::TrainingDiverged(int iteration, double loss)
    : NumericalError("training diverged at iteration " + std::to_string(iteration) +
                     " (loss " + std::to_string(loss) + ")"),
      iteration_(iteration) {}

SampleLoss sample_objective(const NetParams& p, Framework framework, const Structure& x1, const Coords& noise,
                            double t, const Condition& c, const LossWeights& w, bool normalize_loss) {
  if (p.spec.param != parameterization_for(framework)) {
    throw ValidationError("train: " + std::string(to_string(framework)) + " needs a " +
                          std::string(to_string(parameterization_for(framework))) + " network");
  }
  const NoiseTime nt = noise_time(t, p.spec.noise);
  LossWeights wt = w;
  if (normalize_loss) wt.w_mse /= output_scale_sq(p.spec, nt);

  SampleLoss out;
  ForwardCache cache;
  if (framework == Framework::edm) {
    const Coords x_t = x1.coords + nt.sigma * noise;
    const Coords d = net_forward(p, x_t, nt, c, &cache);
    out.loss = edm_objective(x1.with_coords(d), x1, wt);
  } else {
    const Coords x0 = p.spec.init_std * noise;
    const Coords x_t = (1.0 - t) * x0 + t * x1.coords;
    const Coords v = net_forward(p, x_t, nt, c, &cache);
    out.loss = flow_objective(v, x0, x1, t, wt);
  }
  out.grad = zeros_like(p);
  net_backward(p, cache, out.loss.grad, out.grad);
  return out;
}

EvalResult evaluate_net(const NetParams& p, const Structure& reference, const EvalSpec& spec) {
  spec.validate();
  const NetDenoiser d(p);
  const Condition c = p.spec.cond_dim > 0 ? make_condition(reference, spec.pathway, p.spec.noise.sigma_data)
                                          : Condition{};
  SamplerConfig sc = SamplerConfig::ode_default(spec.n_steps);
  sc.noise = p.spec.noise;
  sc.init_std = p.spec.param == Parameterization::v_pred ? p.spec.init_std : p.spec.noise.sigma_max;
  sc.augmentation = AugmentationConfig{false, 0.0};
  EvalResult r;
  double sum = 0.0;
  for (int i = 0; i < spec.n_samples; ++i) {
    sc.seed_streams(spec.seed, static_cast<std::uint64_t>(i));
    const Trajectory tr = ode_sample(d, c, reference, sc);
    r.lddt.push_back(lddt(tr.final_structure, reference));
    sum += r.lddt.back();
  }
  r.mean_lddt = sum / spec.n_samples;
  return r;
}

TrainReport train_from(const NetParams& init, const TrainData& data, const TrainConfig& cfg,
                       const CheckpointHook& hook) {
  cfg.validate();
  init.validate();
  const Structure& ref = data.reference();
  const NetSpec& spec = init.spec;
  if (spec.param != parameterization_for(cfg.framework)) {
    throw ValidationError("train: " + std::string(to_string(cfg.framework)) + " needs a " +
                          std::string(to_string(parameterization_for(cfg.framework))) + " network");
  }
  Condition cond_a, cond_b;
  if (spec.cond_dim > 0) {
    cond_a = make_condition(ref, Pathway::a, spec.noise.sigma_data);
    cond_b = make_condition(ref, Pathway::b, spec.noise.sigma_data);
  }

  RngStream data_rng(cfg.seed, kDataStream);
  RngStream time_rng(cfg.seed, kTimeStream);
  RngStream noise_rng(cfg.seed, kNoiseStream);
  RngStream path_rng(cfg.seed, kPathwayStream);

  TrainReport rep;
  rep.params = init;
  std::optional<Adam> adam;
  if (cfg.optimizer == Optimizer::adam) adam.emplace(init);
  const int n = ref.size();

  for (int it = 0; it < cfg.iterations; ++it) {
    const bool use_a = path_rng.bernoulli(cfg.pathway_mix);
    rep.pathway_a_count += use_a ? 1 : 0;
    const Condition& c = spec.cond_dim == 0 ? cond_a : (use_a ? cond_a : cond_b);

    NetParams grad = zeros_like(rep.params);
    LossPoint lp;
    lp.iteration = it;
    lp.pathway = spec.cond_dim == 0 ? Pathway::none : (use_a ? Pathway::a : Pathway::b);
    for (int b = 0; b < cfg.batch; ++b) {
      const double t = sample_time(cfg.time_dist, time_rng);
      Coords eps(n, 3);
      for (Eigen::Index i = 0; i < eps.rows(); ++i) {
        for (int k = 0; k < 3; ++k) eps(i, k) = noise_rng.normal();
      }
      const Structure x1 = data.draw(spec.init_std * eps, data_rng);
      const SampleLoss s = sample_objective(rep.params, cfg.framework, x1, eps, t, c, cfg.loss, cfg.normalize_loss);
      zip_tensors(grad, s.grad, [&](auto g, auto sg) { g += sg; });
      lp.total += s.loss.total;
      lp.mse += s.loss.mse;
      lp.bond += s.loss.bond;
      lp.smooth_lddt += s.loss.smooth_lddt;
    }
    const double inv = 1.0 / cfg.batch;
    lp.total *= inv;
    lp.mse *= inv;
    lp.bond *= inv;
    lp.smooth_lddt *= inv;
    if (!std::isfinite(lp.total) || lp.total > 1e6) throw TrainingDiverged(it, lp.total);
    rep.loss_curve.push_back(lp);

    zip_tensors(grad, grad, [&](auto g, auto) { g *= inv; });
    if (adam) {
      adam->step(rep.params, grad, cfg);
    } else {
      zip_tensors(rep.params, grad, [&](auto w, auto g) { w -= cfg.lr * g; });
    }

    if (cfg.eval_every > 0 && (it + 1) % cfg.eval_every == 0) {
      rep.eval_curve.push_back({it + 1, evaluate_net(rep.params, ref, cfg.eval).mean_lddt});
      if (hook) hook(it + 1, rep.params);
    }
  }
  return rep;
}

TrainReport train(const NetSpec& spec, const TrainData& data, const TrainConfig& cfg, const CheckpointHook& hook) {
  RngStream init_rng(cfg.seed, kInitStream);
  return train_from(init_params(spec, init_rng), data, cfg, hook);
}

TrainReport train(const NetSpec& spec, const ToySpec& data, const TrainConfig& cfg) {
  return train(spec, ToyData(data, cfg.seed), cfg);
}

PruneResult prune_and_finetune(const NetParams& theta, int k, const TrainData& data, const TrainConfig& cfg,
                               const EvalSpec& eval) {
  PruneResult r;
  r.k = k;
  const NetParams pruned = prune_blocks(theta, k);
  r.baseline = evaluate_net(theta, data.reference(), eval);
  r.zero_shot = evaluate_net(pruned, data.reference(), eval);
  r.finetune = train_from(pruned, data, cfg);
  r.finetuned = evaluate_net(r.finetune.params, data.reference(), eval);
  return r;
}

std::string loss_curve_csv(const TrainReport& r) {
  std::ostringstream os;
  os << "iteration,pathway,total,mse,bond,smooth_lddt\n";
  char buf[160];
  for (const auto& p : r.loss_curve) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g\n", p.iteration,
                  std::string(to_string(p.pathway)).c_str(), p.total, p.mse, p.bond, p.smooth_lddt);
    os << buf;
  }
  return os.str();
}

std::string eval_curve_csv(const TrainReport& r) {
  std::ostringstream os;
  os << "iteration,eval_lddt\n";
  char buf[64];
  for (const auto& p : r.eval_curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", p.iteration, p.lddt);
    os << buf;
  }
  return os.str();
}

}  // namespace fewstep
