#pragma once

#include <array>

#include "fewstep/structure.hpp"

namespace fewstep {

struct LossValue {
  double value = 0.0;
  Coords grad;  // d value / d prediction
};

/// Weighted mean squared atom error, sum_i w_i |p_i - q_i|^2 / sum_i w_i.
/// With align on, target is first superposed onto pred; the optimal motion is held
/// fixed in the gradient, which is exact at the optimum.
LossValue loss_mse(const Structure& pred, const Structure& target, const Eigen::VectorXd& weights, bool align);

/// Mean over declared bonds of (|p_l - p_m| - |q_l - q_m|)^2.
LossValue loss_bond(const Structure& pred, const Structure& target);

/// Pair weights w_lm for the smooth LDDT surrogate: multiplier(entity_l, entity_m)
/// when the target distance is within cutoff, else 0.
struct PairWeightRule {
  double cutoff = 15.0;
  // Indexed by EntityClass; symmetric use.
  std::array<std::array<double, 4>, 4> multiplier{{{1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}}};
};

Eigen::MatrixXd pair_weights(const Structure& target, const PairWeightRule& rule);

constexpr std::array<double, 4> kLddtThresholds{0.5, 1.0, 2.0, 4.0};

/// 1 - sum w_lm eps_lm / sum w_lm with
/// eps_lm = 1/4 sum_k sigmoid(threshold_k - |d_lm^target - d_lm^pred|).
LossValue loss_smooth_lddt(const Structure& pred, const Structure& target, const PairWeightRule& rule = {});

/// Straight-path velocity regression: mean_i |v_i - (x1_i - x0_i)|^2.
LossValue loss_fm(const Coords& v_pred, const Coords& x0, const Coords& x1);

struct LossWeights {
  double w_mse = 1.0;
  double w_bond = 0.0;
  double w_slddt = 0.0;
  std::array<double, 4> entity_weight{1, 1, 1, 1};  // atom-weight multiplier per EntityClass
  PairWeightRule pair_rule;
  bool align_mse = false;

  void validate() const;
};

struct LossReport {
  double mse = 0.0;  // EDM coordinate MSE, or the velocity MSE for flow
  double bond = 0.0;
  double smooth_lddt = 0.0;
  double total = 0.0;
  Coords grad;  // d total / d network output (denoised coords or velocity)
};

Eigen::VectorXd atom_weights(const Structure& s, const LossWeights& w);

/// Weighted sum of the EDM terms evaluated on the denoised prediction.
LossReport edm_objective(const Structure& denoised, const Structure& target, const LossWeights& w);

/// Flow-matching objective; auxiliary terms use x1_hat = x_t + (1 - t) v_pred.
LossReport flow_objective(const Coords& v_pred, const Coords& x0, const Structure& x1, double t,
                          const LossWeights& w);

}  // namespace fewstep
