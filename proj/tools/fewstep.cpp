#include <iostream>

#include "CLI11.hpp"
#include "fewstep/harness.hpp"

int main(int argc, char** argv) {
  using namespace fewstep;
  CLI::App app{"Few-step structure sampling toolkit: train, sample, evaluate, sweep, prune, FLOPs."};
  app.require_subcommand(1);

  std::string config;
  auto* train = app.add_subcommand("train", "Train the toy denoiser; writes checkpoint and loss curves");
  train->add_option("config", config, "Experiment config (JSON)")->required();

  std::optional<int> n_seeds, n_samples;
  auto* sample = app.add_subcommand("sample", "Draw a seeds x samples grid with the configured sampler");
  sample->add_option("config", config, "Experiment config (JSON)")->required();
  sample->add_option("--n-seeds", n_seeds, "Seeds (default sweep.n_seeds)");
  sample->add_option("--n-samples", n_samples, "Samples per seed (default sweep.n_samples)");

  auto* sweep = app.add_subcommand("sweep", "Grid over sampler mode x eta x steps; writes sweep.csv");
  sweep->add_option("config", config, "Experiment config (JSON)")->required();

  auto* prune = app.add_subcommand("prune", "Prune input-side blocks, finetune, and report both evaluations");
  prune->add_option("config", config, "Experiment config (JSON)")->required();

  std::string pred, target;
  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "Score a predicted structure against a target; prints JSON");
  eval->add_option("pred", pred, "Predicted structure file")->required();
  eval->add_option("target", target, "Target structure file")->required();
  eval->add_option("--radius", ef.inclusion_radius, "LDDT inclusion radius in angstrom")->capture_default_str();
  eval->add_option("--success", ef.success_threshold, "RMSD success threshold")->capture_default_str();
  eval->add_option("--clash", ef.clash_distance, "Clash distance")->capture_default_str();
  eval->add_option("-o,--out", ef.out, "Output file (default stdout)");

  FlopsFlags ff;
  auto* flops = app.add_subcommand("flops", "Analytic FLOPs table for architecture presets");
  flops->add_option("--preset", ff.preset, "protenix, mini, tiny or all")->capture_default_str();
  flops->add_option("--tokens", ff.tokens, "Token count(s): N, a,b,c or start:stop:step")->capture_default_str();
  flops->add_option("--msa", ff.msa, "MSA row count(s), same forms")->capture_default_str();
  flops->add_option("--atoms", ff.atoms, "Atom count")->capture_default_str();
  flops->add_option("-o,--out", ff.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  return run_command(
      [&] {
        if (*train) cmd_train(config, std::cerr);
        if (*sample) cmd_sample(config, n_seeds, n_samples, std::cerr);
        if (*sweep) cmd_sweep(config, std::cerr);
        if (*prune) cmd_prune(config, std::cerr);
        if (*eval) cmd_eval(pred, target, ef, std::cout);
        if (*flops) cmd_flops(ff, std::cout);
      },
      std::cerr);
}
