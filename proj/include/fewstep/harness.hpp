#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fewstep/errors.hpp"
#include "fewstep/flops.hpp"
#include "fewstep/metrics.hpp"
#include "fewstep/residual_net.hpp"
#include "fewstep/samplers.hpp"
#include "fewstep/toy.hpp"
#include "fewstep/train.hpp"

namespace fewstep {

// Bad configuration; line is 1-based, 0 when unknown.
class ConfigError : public ValidationError {
 public:
  ConfigError(const std::string& msg, int line);
  int line() const { return line_; }

 private:
  int line_;
};

struct DenoiserConfig {
  std::string backend = "net";  // net | gmm
  NetSpec net;                   // cond_dim is derived from the data
  std::string checkpoint;        // empty: <output_dir>/checkpoint.txt
  Pathway pathway = Pathway::a;
};

struct MetricSettings {
  LddtOptions lddt;
  double success_threshold = 2.0;
  ClashRule clash;
};

struct SweepConfig {
  std::vector<double> eta{1.0, 1.5};
  std::vector<int> steps{2, 10, 200};
  std::vector<SamplerMode> modes{SamplerMode::ode};
  int n_seeds = 5;
  int n_samples = 5;
};

struct PruneConfig {
  std::vector<int> k{1};
  int finetune_iterations = 1500;
};

struct ExperimentConfig {
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  int workers = 1;
  ToySpec data;
  std::uint64_t data_seed = 0;
  DenoiserConfig denoiser;
  std::string sampler_preset = "ode";
  SamplerConfig sampler;
  TrainConfig train;
  MetricSettings metrics;
  SweepConfig sweep;
  PruneConfig prune;

  ExperimentConfig();
  void validate() const;
};

/// JSON config on top of the defaults. Unknown keys, wrong types and invalid
/// values raise ConfigError with the line of the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Every field, defaults included; parse_config(config_to_json(c)) reproduces c.
std::string config_to_json(const ExperimentConfig& c);

// Network shape for the configured data (cond_dim filled in).
NetSpec resolve_net_spec(const ExperimentConfig& c, const Structure& reference);
// Sampler with the denoiser's noise schedule and initial law.
SamplerConfig resolve_sampler(const ExperimentConfig& c, SamplerConfig base);

// Subcommands. Each writes its artifacts and throws on failure.
void cmd_train(const std::string& config_path, std::ostream& log);
void cmd_sample(const std::string& config_path, std::optional<int> n_seeds, std::optional<int> n_samples,
                std::ostream& log);
void cmd_sweep(const std::string& config_path, std::ostream& log);
void cmd_prune(const std::string& config_path, std::ostream& log);

struct EvalFlags {
  double inclusion_radius = 15.0;
  double success_threshold = 2.0;
  double clash_distance = 1.1;
  std::string out;  // empty: stdout
};
void cmd_eval(const std::string& pred_path, const std::string& target_path, const EvalFlags& flags,
              std::ostream& out);

struct FlopsFlags {
  std::string preset = "all";  // protenix | mini | tiny | all
  std::string tokens = "384";  // N, a,b,c or start:stop:step
  std::string msa = "2048";
  int atoms = 8832;
  std::string out;  // empty: stdout
};
void cmd_flops(const FlopsFlags& flags, std::ostream& out);

// "384", "128,256" or "256:768:128" (inclusive).
std::vector<int> parse_int_grid(const std::string& s);

/// Runs fn and maps exceptions to exit codes: 0 ok, 2 configuration/usage
/// error, 3 runtime error. The message goes to err.
int run_command(const std::function<void()>& fn, std::ostream& err);

}  // namespace fewstep
