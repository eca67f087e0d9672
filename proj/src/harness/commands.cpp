#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "fewstep/gmm_denoiser.hpp"
#include "fewstep/harness.hpp"

namespace fewstep {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Setup {
  ExperimentConfig cfg;
  fs::path out;
  std::unique_ptr<ToyData> data;
};

Setup setup(const std::string& config_path) {
  Setup s;
  s.cfg = load_config(config_path);
  s.out = s.cfg.output_dir;
  fs::create_directories(s.out);
  write_file(s.out / "config.effective.json", config_to_json(s.cfg));
  s.data = std::make_unique<ToyData>(s.cfg.data, s.cfg.data_seed);
  return s;
}

fs::path checkpoint_path(const Setup& s) {
  return s.cfg.denoiser.checkpoint.empty() ? s.out / "checkpoint.txt" : fs::path(s.cfg.denoiser.checkpoint);
}

// Denoiser plus the storage it points into.
struct Model {
  std::unique_ptr<NetParams> params;
  std::unique_ptr<Denoiser> denoiser;
  Condition cond;
};

Model load_model(const Setup& s) {
  Model m;
  const Structure& ref = s.data->reference();
  if (s.cfg.denoiser.backend == "gmm") {
    m.denoiser = std::make_unique<GmmDenoiser>(s.cfg.data.mixture, s.cfg.denoiser.net.param,
                                               s.cfg.denoiser.net.init_std);
    return m;
  }
  const fs::path ck = checkpoint_path(s);
  if (!fs::exists(ck)) throw std::runtime_error("checkpoint not found: '" + ck.string() + "' (run train first)");
  m.params = std::make_unique<NetParams>(load_checkpoint(ck.string()));
  if (m.params->spec.cond_dim != 0 && m.params->spec.cond_dim != condition_width(ref.size())) {
    throw std::runtime_error("checkpoint '" + ck.string() + "' does not match the configured data (" +
                             std::to_string(ref.size()) + " atoms)");
  }
  m.denoiser = std::make_unique<NetDenoiser>(*m.params);
  if (m.params->spec.cond_dim > 0) {
    m.cond = make_condition(ref, s.cfg.denoiser.pathway, m.params->spec.noise.sigma_data);
  }
  return m;
}

template <class F>
void parallel_for(int n, int workers, F&& fn) {
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto run = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(workers, n));
  if (threads == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void cmd_train(const std::string& config_path, std::ostream& log) {
  Setup s = setup(config_path);
  if (s.cfg.denoiser.backend != "net") throw ConfigError("train needs denoiser.backend net", 0);
  const NetSpec spec = resolve_net_spec(s.cfg, s.data->reference());
  const TrainReport rep = train(spec, *s.data, s.cfg.train, [&](int it, const NetParams& p) {
    save_checkpoint((s.out / ("checkpoint_iter" + std::to_string(it) + ".txt")).string(), p);
  });
  save_checkpoint(checkpoint_path(s).string(), rep.params);
  write_file(s.out / "loss_curve.csv", loss_curve_csv(rep));
  write_file(s.out / "eval_curve.csv", eval_curve_csv(rep));
  write_structure((s.out / "reference.txt").string(), s.data->reference());
  const double final_loss = rep.loss_curve.empty() ? 0.0 : rep.loss_curve.back().total;
  log << "trained " << s.cfg.train.iterations << " iterations, final batch loss " << num(final_loss) << ", wrote "
      << checkpoint_path(s).string() << "\n";
}

void cmd_sample(const std::string& config_path, std::optional<int> n_seeds, std::optional<int> n_samples,
                std::ostream& log) {
  Setup s = setup(config_path);
  const Model m = load_model(s);
  const Structure& ref = s.data->reference();
  const SamplerConfig sc = resolve_sampler(s.cfg, s.cfg.sampler);
  const int ns = n_seeds.value_or(s.cfg.sweep.n_seeds), nm = n_samples.value_or(s.cfg.sweep.n_samples);
  if (ns < 1 || nm < 1) throw ConfigError("sample: --n-seeds and --n-samples must be >= 1", 0);
  const auto grid = batch_sample(*m.denoiser, m.cond, ref, sc, ns, nm, s.cfg.seed, s.cfg.workers);

  fs::create_directories(s.out / "samples");
  std::string csv = csv_header();
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < nm; ++j) {
      const Structure& x = grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      write_structure((s.out / "samples" / ("seed" + std::to_string(i) + "_sample" + std::to_string(j) + ".txt")).string(), x);
      csv += csv_row("sample", i, j,
                     evaluate(x, ref, s.cfg.metrics.lddt, s.cfg.metrics.success_threshold, s.cfg.metrics.clash));
    }
  }
  write_file(s.out / "sample_metrics.csv", csv);
  SamplerConfig first = sc;
  first.seed_streams(s.cfg.seed, 0);
  write_file(s.out / "trajectory.jsonl", trajectory_jsonl(sample(*m.denoiser, m.cond, ref, first)));
  log << "wrote " << ns * nm << " samples to " << (s.out / "samples").string() << "\n";
}

void cmd_sweep(const std::string& config_path, std::ostream& log) {
  Setup s = setup(config_path);
  const Model m = load_model(s);
  const Structure& ref = s.data->reference();
  const SweepConfig& sw = s.cfg.sweep;

  struct Cell {
    SamplerMode mode;
    double eta;
    int steps;
  };
  std::vector<Cell> cells;
  for (auto mode : sw.modes) {
    for (double eta : sw.eta) {
      for (int steps : sw.steps) cells.push_back({mode, eta, steps});
    }
  }
  std::vector<std::string> rows(cells.size());
  parallel_for(static_cast<int>(cells.size()), s.cfg.workers, [&](int ci) {
    const Cell& cell = cells[static_cast<std::size_t>(ci)];
    SamplerConfig sc = cell.mode == SamplerMode::ode ? SamplerConfig::ode_default(cell.steps)
                                                     : SamplerConfig::af3_default(cell.steps);
    sc.eta = {cell.eta};
    sc.augment = s.cfg.sampler.augment;
    sc.augmentation = s.cfg.sampler.augmentation;
    sc.init_std = s.cfg.sampler.init_std;
    sc = resolve_sampler(s.cfg, sc);
    const auto grid = batch_sample(*m.denoiser, m.cond, ref, sc, sw.n_seeds, sw.n_samples, s.cfg.seed, 1);

    std::vector<double> scores;
    double rmsd_sum = 0.0;
    int successes = 0;
    for (const auto& row : grid) {
      for (const auto& x : row) {
        scores.push_back(lddt(x, ref, s.cfg.metrics.lddt));
        const auto rs = rmsd_success(x, ref, s.cfg.metrics.success_threshold);
        rmsd_sum += rs.rmsd;
        successes += rs.success ? 1 : 0;
      }
    }
    const double n = static_cast<double>(scores.size());
    double mean = 0.0;
    for (double v : scores) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : scores) var += (v - mean) * (v - mean);
    var /= n;
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const ClashGridReport clash = clash_stats(grid, s.cfg.metrics.clash);
    rows[static_cast<std::size_t>(ci)] = std::string(to_string(cell.mode)) + "," + num(cell.eta) + "," +
                                         std::to_string(cell.steps) + "," + std::to_string(scores.size()) + "," +
                                         num(mean) + "," + num(var) + "," + num(*hi) + "," + num(*lo) + "," +
                                         num(*hi - *lo) + "," + num(rmsd_sum / n) + "," + num(successes / n) + "," +
                                         (clash.exists_any ? "1" : "0") + "," +
                                         (clash.all_of_first_column ? "1" : "0") + "," +
                                         (clash.all_grid ? "1" : "0") + "\n";
  });
  std::string csv =
      "mode,eta,steps,n,mean_lddt,var_lddt,best_lddt,worst_lddt,spread,mean_rmsd,success_rate,clash_any,"
      "clash_all_first_seed,clash_all\n";
  for (const auto& r : rows) csv += r;
  write_file(s.out / "sweep.csv", csv);
  log << "wrote " << cells.size() << " sweep rows to " << (s.out / "sweep.csv").string() << "\n";
}

void cmd_prune(const std::string& config_path, std::ostream& log) {
  Setup s = setup(config_path);
  if (s.cfg.denoiser.backend != "net") throw ConfigError("prune needs denoiser.backend net", 0);
  const Model m = load_model(s);
  TrainConfig ft = s.cfg.train;
  ft.iterations = s.cfg.prune.finetune_iterations;
  ft.eval_every = 0;
  EvalSpec ev = s.cfg.train.eval;
  ev.pathway = s.cfg.denoiser.pathway;
  std::string csv = "k,n_blocks,baseline_lddt,zero_shot_lddt,finetuned_lddt\n";
  for (int k : s.cfg.prune.k) {
    if (k >= m.params->spec.n_blocks) {
      throw ConfigError("prune.k entry " + std::to_string(k) + " exceeds the checkpoint's blocks", 0);
    }
    TrainConfig ftk = ft;
    ftk.seed = s.cfg.train.seed + 1 + static_cast<std::uint64_t>(k);
    const PruneResult r = prune_and_finetune(*m.params, k, *s.data, ftk, ev);
    save_checkpoint((s.out / ("checkpoint_pruned" + std::to_string(k) + ".txt")).string(), r.finetune.params);
    csv += std::to_string(k) + "," + std::to_string(m.params->spec.n_blocks - k) + "," + num(r.baseline.mean_lddt) +
           "," + num(r.zero_shot.mean_lddt) + "," + num(r.finetuned.mean_lddt) + "\n";
  }
  write_file(s.out / "prune.csv", csv);
  log << "wrote " << (s.out / "prune.csv").string() << "\n";
}

void cmd_eval(const std::string& pred_path, const std::string& target_path, const EvalFlags& flags,
              std::ostream& out) {
  const Structure pred = read_structure(pred_path);
  const Structure target = read_structure(target_path);
  LddtOptions opts;
  opts.inclusion_radius = flags.inclusion_radius;
  ClashRule clash;
  clash.min_distance = flags.clash_distance;
  const std::string j = to_json(evaluate(pred, target, opts, flags.success_threshold, clash)) + "\n";
  if (flags.out.empty()) {
    out << j;
  } else {
    write_file(flags.out, j);
  }
}

std::vector<int> parse_int_grid(const std::string& s) {
  auto to_int = [&](const std::string& t) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != t.size()) throw ValidationError("bad integer '" + t + "' in grid '" + s + "'");
    return v;
  };
  std::vector<int> out;
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ValidationError("grid '" + s + "' must be start:stop:step");
    const int a = to_int(parts[0]), b = to_int(parts[1]), step = to_int(parts[2]);
    if (step <= 0 || b < a) throw ValidationError("grid '" + s + "' needs step > 0 and stop >= start");
    for (int v = a; v <= b; v += step) out.push_back(v);
  } else {
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(to_int(p));
  }
  if (out.empty()) throw ValidationError("empty grid '" + s + "'");
  return out;
}

void cmd_flops(const FlopsFlags& flags, std::ostream& out) {
  std::vector<ArchConfig> archs;
  if (flags.preset == "all") {
    for (const auto& n : arch_preset_names()) archs.push_back(arch_preset(n));
  } else {
    archs.push_back(arch_preset(flags.preset));
  }
  const auto tokens = parse_int_grid(flags.tokens);
  const auto msa = parse_int_grid(flags.msa);
  std::string csv = flops_csv_header();
  for (const auto& a : archs) {
    for (int m : msa) {
      WorkloadShape fixed{tokens.front(), m, flags.atoms};
      for (const auto& row : flops_curve(a, SweepAxis::tokens, tokens, fixed)) csv += flops_csv_row(row);
    }
  }
  if (flags.out.empty()) {
    out << csv;
  } else {
    write_file(flags.out, csv);
  }
}

int run_command(const std::function<void()>& fn, std::ostream& err) {
  try {
    fn();
    return 0;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace fewstep
