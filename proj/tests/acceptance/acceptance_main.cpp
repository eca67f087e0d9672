#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fewstep/flops.hpp"
#include "fewstep/gmm_denoiser.hpp"
#include "fewstep/harness.hpp"
#include "fewstep/losses.hpp"
#include "fewstep/metrics.hpp"
#include "fewstep/residual_net.hpp"
#include "fewstep/samplers.hpp"
#include "fewstep/schedules.hpp"
#include "fewstep/train.hpp"
#include "test_support.hpp"

using namespace fewstep;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

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

// 1. af3 with gamma0 = 0, lambda = 1, eta = 1 reproduces the ODE sampler step for step.
Outcome degeneracy() {
  RngStream rng(1001, 0);
  int matched = 0;
  for (int c = 0; c < 100; ++c) {
    const int n_atoms = 1 + static_cast<int>(rng.uniform() * 12);
    const int n_steps = 1 + static_cast<int>(rng.uniform() * 10);
    std::unique_ptr<Denoiser> d;
    std::unique_ptr<NetParams> p;
    if (c % 2 == 0) {
      GaussianMixture mix;
      const int k = 1 + c % 3;
      for (int i = 0; i < k; ++i) {
        mix.components.push_back(
            {0.2 + rng.uniform(), Vec3(5 * rng.normal(), 5 * rng.normal(), 5 * rng.normal()), 0.5 + 3 * rng.uniform()});
      }
      double total = 0.0;
      for (const auto& comp : mix.components) total += comp.weight;
      for (auto& comp : mix.components) comp.weight /= total;
      d = std::make_unique<GmmDenoiser>(mix, c % 4 == 0 ? Parameterization::x_pred : Parameterization::v_pred);
    } else {
      NetSpec spec;
      spec.n_blocks = 1 + c % 4;
      spec.hidden = 8;
      spec.time_embed = 4;
      spec.param = c % 4 == 1 ? Parameterization::x_pred : Parameterization::v_pred;
      RngStream init(static_cast<std::uint64_t>(c), 7);
      p = std::make_unique<NetParams>(init_params(spec, init));
      d = std::make_unique<NetDenoiser>(*p);
    }
    SamplerConfig ode = SamplerConfig::ode_default(n_steps);
    ode.seed_streams(static_cast<std::uint64_t>(c), 3);
    SamplerConfig af3 = ode;
    af3.mode = SamplerMode::af3;
    const Structure layout = make_structure(Coords::Zero(n_atoms, 3));
    if (same_trajectory(af3_sample(*d, Condition{}, layout, af3), ode_sample(*d, Condition{}, layout, ode))) ++matched;
  }
  return {matched == 100, std::to_string(matched) + "/100 trajectories bitwise identical"};
}

// 2. Single Gaussian a = 1, sigma_max = 16: the flow maps |x| by sqrt((1 + smin^2) / (1 + smax^2)).
Outcome analytic_endpoint() {
  NoiseLevelParams p;
  p.sigma_data = 1.0;
  p.sigma_max = 16.0;
  p.sigma_min = 4e-4 / 16.0;
  GaussianMixture mix;
  mix.components = {GmmComponent{1.0, Vec3::Zero(), 1.0}};
  const GmmDenoiser d(mix);
  const Structure layout = make_structure(Coords::Zero(4, 3));
  auto ratio = [&](int n) {
    SamplerConfig cfg = SamplerConfig::ode_default(n);
    cfg.noise = p;
    cfg.augment = false;
    cfg.seed_streams(11, 0);
    const Trajectory tr = ode_sample(d, Condition{}, layout, cfg);
    return tr.final_structure.coords.norm() / tr.x_init.norm();
  };
  const double target = 1.0 / std::sqrt(257.0);
  const double r512 = ratio(512), r256 = ratio(256);
  const double rel = std::abs(r512 - target) / target;
  const double factor = std::abs(r256 - target) / std::abs(r512 - target);
  const bool pass = rel <= 1e-3 && factor >= 1.5 && factor <= 2.5;
  return {pass, "512-step ratio " + fmt("%.6f", r512) + " vs " + fmt("%.6f", target) + ", rel err " +
                    fmt("%.3e", rel) + " (limit 1e-3), abs gap " + fmt("%.3e", std::abs(r512 - target)) +
                    ", halving factor " + fmt("%.3f", factor) + " (limit [1.5, 2.5])"};
}

template <class F>
double fd_error(const Coords& x, F&& loss) {
  const LossValue lv = loss(x);
  const Coords num = support::numeric_gradient([&](const Coords& c) { return loss(c).value; }, x, 1e-5);
  return support::max_rel_err(lv.grad, num, 1e-6);
}

// 3. Analytic gradients against central differences, 100 instances of <= 10 atoms per loss.
Outcome gradients() {
  RngStream rng(1003, 0);
  double worst_mse = 0, worst_bond = 0, worst_slddt = 0, worst_fm = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 9;
    const Structure t = support::random_polymer(n, 3.0, rng);
    const Structure p = t.with_coords(t.coords + support::random_coords(n, 1.0, rng));
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = 0.5 + rng.uniform();
    const bool align = trial % 2 == 1;
    worst_mse = std::max(worst_mse, fd_error(p.coords, [&](const Coords& c) {
                           return loss_mse(p.with_coords(c), t, w, align);
                         }));
    worst_bond = std::max(worst_bond, fd_error(p.coords, [&](const Coords& c) { return loss_bond(p.with_coords(c), t); }));
    worst_slddt =
        std::max(worst_slddt, fd_error(p.coords, [&](const Coords& c) { return loss_smooth_lddt(p.with_coords(c), t); }));
    const Coords x0 = support::random_coords(n, 3.0, rng), x1 = support::random_coords(n, 3.0, rng);
    const Coords v = support::random_coords(n, 3.0, rng);
    worst_fm = std::max(worst_fm, fd_error(v, [&](const Coords& c) { return loss_fm(c, x0, x1); }));
  }
  const double worst = std::max({worst_mse, worst_bond, worst_slddt, worst_fm});
  return {worst < 1e-5, "max rel err mse " + fmt("%.2e", worst_mse) + ", bond " + fmt("%.2e", worst_bond) +
                            ", smooth-lddt " + fmt("%.2e", worst_slddt) + ", fm " + fmt("%.2e", worst_fm) +
                            " over 100 instances each (limit 1e-5)"};
}

// 4. Plateau at perfect prediction and monotone growth under uniform perturbation.
Outcome plateau() {
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double oracle = 1.0 - 0.25 * (sig(0.5) + sig(1.0) + sig(2.0) + sig(4.0));
  RngStream rng(1004, 0);
  double worst_plateau = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < 10; ++trial) {
    const Structure t = support::random_structure(4 + trial, 3.0, rng);
    worst_plateau = std::max(worst_plateau, std::abs(loss_smooth_lddt(t, t).value - 0.19592));
    const Coords dir = support::random_coords(t.size(), 1.0, rng);
    double prev = -1.0;
    for (int i = 0; i < 20; ++i) {
      const double v = loss_smooth_lddt(t.with_coords(t.coords + (0.25 * i) * dir), t).value;
      if (v < prev) monotone = false;
      prev = v;
    }
  }
  const bool pass = worst_plateau <= 1e-5 && std::abs(oracle - 0.19592) <= 1e-5 && monotone;
  return {pass, "oracle " + fmt("%.6f", oracle) + ", max |loss - 0.19592| " + fmt("%.2e", worst_plateau) +
                    ", monotone on 20-point grid: " + (monotone ? "yes" : "no")};
}

double brute_lddt(const Structure& p, const Structure& t) {
  long hits = 0, total = 0;
  for (int l = 0; l < t.size(); ++l) {
    for (int m = 0; m < t.size(); ++m) {
      if (l == m) continue;
      const double dt = (t.coords.row(l) - t.coords.row(m)).norm();
      if (dt > 15.0) continue;
      const double dp = (p.coords.row(l) - p.coords.row(m)).norm();
      for (double th : {0.5, 1.0, 2.0, 4.0}) {
        ++total;
        if (std::abs(dt - dp) <= th) ++hits;
      }
    }
  }
  return total == 0 ? std::nan("") : static_cast<double>(hits) / static_cast<double>(total);
}

// 5. Hard LDDT equals exhaustive enumeration.
Outcome lddt_oracle() {
  RngStream rng(1005, 0);
  int matched = 0;
  for (int c = 0; c < 1000; ++c) {
    const int n = 2 + c % 9;
    const Structure t = support::random_structure(n, 2.0 + 4.0 * rng.uniform(), rng);
    const Structure p = t.with_coords(t.coords + support::random_coords(n, 0.1 + 3.0 * rng.uniform(), rng));
    const double b = brute_lddt(p, t);
    if (std::isnan(b)) {
      try {
        lddt(p, t);
      } catch (const UndefinedScore&) {
        ++matched;
      }
    } else if (lddt(p, t) == b) {
      ++matched;
    }
  }
  return {matched == 1000, std::to_string(matched) + "/1000 exact matches"};
}

double beta_ks(std::vector<double> xs, double a, double b) {
  const int n = 20000;
  std::vector<double> cdf(n + 1, 0.0);
  auto pdf = [&](double x) { return std::pow(x, a - 1) * std::pow(1 - x, b - 1); };
  const double h = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    const double x0 = i * h;
    cdf[i + 1] = cdf[i] + h / 6 * (pdf(x0) + 4 * pdf(x0 + h / 2) + pdf(x0 + h));
  }
  for (double& g : cdf) g /= cdf.back();
  auto F = [&](double x) {
    const double pos = x * n;
    const int i = std::min(static_cast<int>(pos), n - 1);
    const double f = pos - i;
    return cdf[i] * (1 - f) + cdf[i + 1] * f;
  };
  std::sort(xs.begin(), xs.end());
  const double m = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = F(xs[i]);
    d = std::max({d, std::abs((i + 1) / m - f), std::abs(i / m - f)});
  }
  return d;
}

// 6. Beta(2.5, 2.5) time sampler.
Outcome beta_sampler() {
  TimeDist dist;
  RngStream rng(1006, 0);
  std::vector<double> xs(100000);
  for (double& x : xs) x = sample_time(dist, rng);
  const double m = mean(xs);
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  var /= static_cast<double>(xs.size() - 1);
  const double ks = beta_ks(xs, 2.5, 2.5);
  const bool pass = std::abs(m - 0.5) <= 0.005 && std::abs(var - 1.0 / 24.0) <= 0.002 && ks < 0.01;
  return {pass, "mean " + fmt("%.5f", m) + ", var " + fmt("%.5f", var) + " (oracle 0.04167), KS " + fmt("%.4f", ks)};
}

struct Trained {
  ExperimentConfig cfg;
  std::unique_ptr<ToyData> data;
  NetParams params;
};

Trained train_toy() {
  Trained t;
  t.data = std::make_unique<ToyData>(t.cfg.data, t.cfg.data_seed);
  const NetSpec spec = resolve_net_spec(t.cfg, t.data->reference());
  t.params = train(spec, *t.data, t.cfg.train).params;
  return t;
}

// Per-seed mean LDDT of 5 samples; sampling noise is shared across configurations of the same seed.
std::vector<double> seed_scores(const Trained& t, SamplerConfig sc, int n_seeds) {
  const NetDenoiser d(t.params);
  const Structure& ref = t.data->reference();
  const Condition cond = make_condition(ref, Pathway::a, t.params.spec.noise.sigma_data);
  sc.augmentation = t.cfg.sampler.augmentation;
  sc = resolve_sampler(t.cfg, sc);
  std::vector<double> out;
  for (int s = 0; s < n_seeds; ++s) {
    const auto grid = batch_sample(d, cond, ref, sc, 1, 5, static_cast<std::uint64_t>(s));
    std::vector<double> v;
    for (const auto& x : grid[0]) v.push_back(lddt(x, ref, t.cfg.metrics.lddt));
    out.push_back(mean(v));
  }
  return out;
}

// 7. Few-step behaviour of the trained toy denoiser over 20 seeds.
Outcome few_step(const Trained& t) {
  const int n = 20;
  const auto ode2 = seed_scores(t, SamplerConfig::ode_default(2), n);
  const auto ode200 = seed_scores(t, SamplerConfig::ode_default(200), n);
  SamplerConfig hot = SamplerConfig::ode_default(2);
  hot.eta = {1.5};
  const auto ode2_hot = seed_scores(t, hot, n);
  const auto af3 = seed_scores(t, SamplerConfig::af3_default(2), n);
  int wins = 0;
  for (int s = 0; s < n; ++s) wins += ode2[static_cast<std::size_t>(s)] > ode2_hot[static_cast<std::size_t>(s)];
  const bool a = mean(ode2) >= 0.95 * mean(ode200);
  const bool b = wins >= 16;
  const bool c = mean(af3) < mean(ode2);
  return {a && b && c, std::string("(a) ode2 ") + fmt("%.4f", mean(ode2)) + " vs 0.95 x ode200 " +
                           fmt("%.4f", 0.95 * mean(ode200)) + (a ? " ok" : " FAIL") + "; (b) eta 1.0 beats 1.5 in " +
                           std::to_string(wins) + "/20" + (b ? " ok" : " FAIL") + " (eta 1.5 mean " +
                           fmt("%.4f", mean(ode2_hot)) + "); (c) af3 default " + fmt("%.4f", mean(af3)) +
                           (c ? " < " : " >= ") + "ode2"};
}

// 8. Prune input-side blocks, finetune, compare medians over 5 seeds.
Outcome prune_trend(const Trained& t) {
  const int n_blocks = t.params.spec.n_blocks;
  std::map<int, std::vector<double>> zero, tuned;
  std::vector<double> base;
  for (int s = 0; s < 5; ++s) {
    TrainConfig ft = t.cfg.train;
    ft.iterations = t.cfg.prune.finetune_iterations;
    ft.eval_every = 0;
    EvalSpec ev = t.cfg.train.eval;
    ev.seed = 500 + static_cast<std::uint64_t>(s);
    for (int k : {1, n_blocks - 1}) {
      ft.seed = 1000 + static_cast<std::uint64_t>(s * 10 + k);
      const PruneResult r = prune_and_finetune(t.params, k, *t.data, ft, ev);
      zero[k].push_back(r.zero_shot.mean_lddt);
      tuned[k].push_back(r.finetuned.mean_lddt);
      if (k == 1) base.push_back(r.baseline.mean_lddt);
    }
  }
  const int deep = n_blocks - 1;
  const double mb = median(base);
  const bool finetune_helps = median(tuned[1]) >= median(zero[1]) && median(tuned[deep]) >= median(zero[deep]);
  const bool close = median(tuned[1]) >= 0.98 * mb;
  return {finetune_helps && close,
          "baseline " + fmt("%.4f", mb) + "; k=1 zero-shot " + fmt("%.4f", median(zero[1])) + " finetuned " +
              fmt("%.4f", median(tuned[1])) + "; k=" + std::to_string(deep) + " zero-shot " +
              fmt("%.4f", median(zero[deep])) + " finetuned " + fmt("%.4f", median(tuned[deep])) +
              " (medians over 5 seeds; small-k limit " + fmt("%.4f", 0.98 * mb) + ")"};
}

// 9. Analytic FLOPs: ratio at the reference workload and preset ordering over the figure grid.
Outcome flops() {
  const WorkloadShape w{384, 2048, 8832};
  const double ratio = flops_estimate(arch_preset("tiny"), w).total / flops_estimate(arch_preset("protenix"), w).total;
  int ordered = 0, total = 0;
  for (int n : figure_token_grid()) {
    for (int m : figure_msa_grid()) {
      const WorkloadShape s{n, m, 8832};
      const double p = flops_estimate(arch_preset("protenix"), s).total;
      const double mi = flops_estimate(arch_preset("mini"), s).total;
      const double t = flops_estimate(arch_preset("tiny"), s).total;
      ++total;
      ordered += p > mi && mi > t;
    }
  }
  return {ratio <= 0.20 && ordered == total, "tiny/protenix " + fmt("%.4f", ratio) + " (limit 0.20), ordering holds on " +
                                                 std::to_string(ordered) + "/" + std::to_string(total) + " grid points"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::size_t> hash_tree(const fs::path& root) {
  std::map<std::string, std::size_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = std::hash<std::string>{}(slurp(e.path()));
  }
  return out;
}

// 10. Every CLI command twice from scratch; artifacts compared by content hash.
Outcome determinism(const std::string& cli, const fs::path& workdir) {
  if (cli.empty()) return {false, "no --cli binary given"};
  const fs::path dir = workdir / "cli";
  const std::string config = R"({
  "output_dir": ")" + (dir / "run").string() + R"(",
  "seed": 3,
  "workers": 2,
  "train": {"iterations": 300, "eval_every": 100, "eval": {"n_samples": 2}},
  "sweep": {"modes": ["ode", "af3"]},
  "prune": {"k": [1, 5], "finetune_iterations": 50}
}
)";
  const std::string q = "'" + cli + "'";
  const std::string run = (dir / "run").string();
  const std::vector<std::string> cmds = {
      q + " train " + (dir / "c.json").string(),
      q + " sample " + (dir / "c.json").string() + " --n-seeds 2 --n-samples 3",
      q + " sweep " + (dir / "c.json").string(),
      q + " prune " + (dir / "c.json").string(),
      q + " eval " + run + "/samples/seed0_sample0.txt " + run + "/reference.txt -o " + run + "/eval.json",
      q + " flops --tokens 128:2048:128 --msa 1,2048,16384 -o " + run + "/flops.csv",
  };
  std::vector<std::map<std::string, std::size_t>> hashes;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "c.json") << config;
    for (const auto& c : cmds) {
      const int rc = std::system((c + " 2>>" + (dir / "log.txt").string()).c_str());
      if (rc != 0) return {false, "command failed (" + std::to_string(rc) + "): " + c};
    }
    hashes.push_back(hash_tree(dir / "run"));
  }
  int differing = 0;
  for (const auto& [name, h] : hashes[0]) differing += !hashes[1].count(name) || hashes[1].at(name) != h;
  const bool same = hashes[0].size() == hashes[1].size() && differing == 0;
  return {same && hashes[0].size() > 10, std::to_string(hashes[0].size()) + " artifacts from 6 commands, " +
                                            std::to_string(differing) + " differ between runs"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks; one PASS/FAIL line per criterion"};
  std::string workdir = "acceptance_work", cli;
  app.add_option("--workdir", workdir, "Scratch directory");
  app.add_option("--cli", cli, "Path to the fewstep executable");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  int failed = 0;
  auto report = [&](int id, const char* name, double limit_s, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = limit_s <= 0 || secs < limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s: %s [%.1fs%s]\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
                in_time ? "" : fmt(", over %.0fs limit", limit_s).c_str());
    std::fflush(stdout);
  };

  report(1, "sampler-degeneracy", 10, degeneracy);
  report(2, "analytic-ode-endpoint", 5, analytic_endpoint);
  report(3, "gradient-suite", 30, gradients);
  report(4, "smooth-lddt-plateau", 0, plateau);
  report(5, "hard-lddt-oracle", 10, lddt_oracle);
  report(6, "beta-time-sampler", 0, beta_sampler);
  const auto train_start = std::chrono::steady_clock::now();
  std::unique_ptr<Trained> toy;
  report(7, "few-step-reproduction", 0, [&] {
    toy = std::make_unique<Trained>(train_toy());
    Outcome o = few_step(*toy);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - train_start).count();
    if (secs >= 600) o.pass = false;
    o.detail += "; incl. training " + fmt("%.0fs", secs) + " (limit 600s)";
    return o;
  });
  report(8, "prune-finetune-trend", 600, [&] {
    if (!toy) return Outcome{false, "toy model unavailable"};
    return prune_trend(*toy);
  });
  report(9, "flops-model", 1, flops);
  report(10, "cli-determinism", 0, [&] { return determinism(cli, workdir); });
  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
