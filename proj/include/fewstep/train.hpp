#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fewstep/errors.hpp"
#include "fewstep/losses.hpp"
#include "fewstep/residual_net.hpp"
#include "fewstep/schedules.hpp"
#include "fewstep/toy.hpp"

namespace fewstep {

enum class Framework { edm, flow };
enum class Optimizer { sgd, adam };

std::string_view to_string(Framework f);
Framework parse_framework(std::string_view s);
std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view s);

// Parameterization a framework trains.
Parameterization parameterization_for(Framework f);

/// Source of training targets x1.
class TrainData {
 public:
  virtual ~TrainData() = default;
  // Layout and conditioning reference.
  virtual const Structure& reference() const = 0;
  // One target; x0 is the flow source sample of the same draw (unused by most sources).
  virtual Structure draw(const Coords& x0, RngStream& rng) const = 0;
};

/// Toy data: the reference plus jitter, re-centered; fresh mixture draws for gmm.
class ToyData final : public TrainData {
 public:
  ToyData(ToySpec spec, std::uint64_t seed);
  const Structure& reference() const override { return reference_; }
  Structure draw(const Coords& x0, RngStream& rng) const override;
  const ToySpec& spec() const { return spec_; }

 private:
  ToySpec spec_;
  Structure reference_;
};

struct EvalSpec {
  int n_samples = 8;
  int n_steps = 2;
  Pathway pathway = Pathway::a;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainConfig {
  Framework framework = Framework::edm;
  int batch = 16;
  int iterations = 2000;
  double lr = 1e-3;
  TimeDist time_dist;
  LossWeights loss;
  double pathway_mix = 0.5;  // probability of pathway a per iteration
  std::uint64_t seed = 0;
  int eval_every = 0;  // 0 disables the eval curve
  EvalSpec eval;
  // Divides the coordinate/velocity term by the squared output scale of the network
  // (c_out^2 for edm, init_std^2 + sigma_data^2 for flow), making it O(1) at every t.
  bool normalize_loss = false;
  Optimizer optimizer = Optimizer::sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct LossPoint {
  int iteration = 0;
  Pathway pathway = Pathway::none;
  double total = 0.0;  // batch means
  double mse = 0.0;
  double bond = 0.0;
  double smooth_lddt = 0.0;
};

struct EvalPoint {
  int iteration = 0;  // iterations completed
  double lddt = 0.0;
};

struct TrainReport {
  std::vector<LossPoint> loss_curve;
  std::vector<EvalPoint> eval_curve;
  NetParams params;
  int pathway_a_count = 0;
};

// Thrown when the batch loss is NaN or exceeds 1e6.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(int iteration, double loss);
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

// Called after each eval point with the iterations completed and the current weights.
using CheckpointHook = std::function<void(int, const NetParams&)>;

/// Trains a freshly initialized network (initialization stream derived from cfg.seed).
TrainReport train(const NetSpec& spec, const TrainData& data, const TrainConfig& cfg, const CheckpointHook& hook = {});
TrainReport train(const NetSpec& spec, const ToySpec& data, const TrainConfig& cfg);

/// Continues training from the given parameters.
TrainReport train_from(const NetParams& init, const TrainData& data, const TrainConfig& cfg,
                       const CheckpointHook& hook = {});

/// One sample of the training objective with its parameter gradient (not averaged over a batch).
struct SampleLoss {
  LossReport loss;
  NetParams grad;
};
SampleLoss sample_objective(const NetParams& p, Framework framework, const Structure& x1, const Coords& noise,
                            double t, const Condition& c, const LossWeights& w, bool normalize_loss);

struct EvalResult {
  double mean_lddt = 0.0;
  std::vector<double> lddt;
};

/// ODE samples from the network scored with hard LDDT against the reference.
EvalResult evaluate_net(const NetParams& p, const Structure& reference, const EvalSpec& spec);

struct PruneResult {
  int k = 0;
  EvalResult baseline;
  EvalResult zero_shot;
  EvalResult finetuned;
  TrainReport finetune;
};

/// Drops the first k blocks, scores the result without updates, then finetunes
/// the remaining weights with cfg and scores again.
PruneResult prune_and_finetune(const NetParams& theta, int k, const TrainData& data, const TrainConfig& cfg,
                               const EvalSpec& eval);

// iteration,pathway,total,mse,bond,smooth_lddt[,eval_lddt]
std::string loss_curve_csv(const TrainReport& r);
std::string eval_curve_csv(const TrainReport& r);

}  // namespace fewstep
