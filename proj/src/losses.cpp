#include "fewstep/losses.hpp"

#include <cmath>

#include "fewstep/geometry.hpp"

namespace fewstep {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

LossValue loss_mse(const Structure& pred, const Structure& target, const Eigen::VectorXd& weights, bool align) {
  require_same_size(pred, target, "loss_mse");
  if (weights.size() != pred.size()) throw ValidationError("loss_mse: weight count mismatch");
  if ((weights.array() < 0.0).any() || !(weights.sum() > 0.0)) {
    throw ValidationError("loss_mse: weights must be nonnegative and not all zero");
  }
  Coords ref = target.coords;
  if (align) ref = kabsch_align(target, pred, weights).aligned.coords;
  const Coords diff = pred.coords - ref;
  const double wsum = weights.sum();
  LossValue out;
  out.value = weights.dot(diff.rowwise().squaredNorm()) / wsum;
  out.grad = (2.0 / wsum) * (weights.asDiagonal() * diff);
  return out;
}

LossValue loss_bond(const Structure& pred, const Structure& target) {
  require_same_size(pred, target, "loss_bond");
  if (target.bonds.empty()) throw ValidationError("loss_bond: no bonds declared");
  LossValue out;
  out.grad = Coords::Zero(pred.size(), 3);
  const double inv = 1.0 / static_cast<double>(target.bonds.size());
  for (const auto& b : target.bonds) {
    const Vec3 dp = (pred.coords.row(b.l) - pred.coords.row(b.m)).transpose();
    const double lp = dp.norm();
    if (lp < 1e-12) {
      throw NumericalError("loss_bond: predicted bond (" + std::to_string(b.l) + ", " + std::to_string(b.m) +
                           ") has zero length");
    }
    const double lt = (target.coords.row(b.l) - target.coords.row(b.m)).norm();
    const double dev = lp - lt;
    out.value += inv * dev * dev;
    const Vec3 g = (2.0 * inv * dev / lp) * dp;
    out.grad.row(b.l) += g.transpose();
    out.grad.row(b.m) -= g.transpose();
  }
  return out;
}

Eigen::MatrixXd pair_weights(const Structure& target, const PairWeightRule& rule) {
  const int n = target.size();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int l = 0; l < n; ++l) {
    for (int m = l + 1; m < n; ++m) {
      const double d = (target.coords.row(l) - target.coords.row(m)).norm();
      if (d <= rule.cutoff) {
        const auto el = static_cast<std::size_t>(target.entity[static_cast<std::size_t>(l)]);
        const auto em = static_cast<std::size_t>(target.entity[static_cast<std::size_t>(m)]);
        w(l, m) = w(m, l) = rule.multiplier[el][em];
      }
    }
  }
  return w;
}

LossValue loss_smooth_lddt(const Structure& pred, const Structure& target, const PairWeightRule& rule) {
  require_same_size(pred, target, "loss_smooth_lddt");
  if (pred.size() < 2) throw ValidationError("loss_smooth_lddt: need at least 2 atoms");
  const Eigen::MatrixXd w = pair_weights(target, rule);
  const int n = pred.size();
  double wsum = 0.0;
  for (int l = 0; l < n; ++l) {
    for (int m = l + 1; m < n; ++m) wsum += w(l, m);
  }
  if (!(wsum > 0.0)) throw ValidationError("loss_smooth_lddt: all pair weights are zero");

  double acc = 0.0;
  LossValue out;
  out.grad = Coords::Zero(n, 3);
  for (int l = 0; l < n; ++l) {
    for (int m = l + 1; m < n; ++m) {
      if (w(l, m) == 0.0) continue;
      const Vec3 dp = (pred.coords.row(l) - pred.coords.row(m)).transpose();
      const double d = dp.norm();
      const double d_gt = (target.coords.row(l) - target.coords.row(m)).norm();
      const double delta = std::abs(d_gt - d);
      double eps = 0.0, deps = 0.0;
      for (double th : kLddtThresholds) {
        const double s = sigmoid(th - delta);
        eps += 0.25 * s;
        deps -= 0.25 * s * (1.0 - s);  // d eps / d delta
      }
      acc += w(l, m) * eps;
      if (d > 0.0) {
        const double sign = d > d_gt ? 1.0 : (d < d_gt ? -1.0 : 0.0);
        // d value / d d_lm = -(w / W) deps * d delta / d d_lm
        const double g = -(w(l, m) / wsum) * deps * sign / d;
        out.grad.row(l) += g * dp.transpose();
        out.grad.row(m) -= g * dp.transpose();
      }
    }
  }
  out.value = 1.0 - acc / wsum;
  return out;
}

LossValue loss_fm(const Coords& v_pred, const Coords& x0, const Coords& x1) {
  if (v_pred.rows() != x0.rows() || x0.rows() != x1.rows()) throw ValidationError("loss_fm: shape mismatch");
  if (v_pred.rows() == 0) throw ValidationError("loss_fm: empty input");
  const double inv = 1.0 / static_cast<double>(v_pred.rows());
  const Coords diff = v_pred - (x1 - x0);
  LossValue out;
  out.value = inv * diff.squaredNorm();
  out.grad = (2.0 * inv) * diff;
  return out;
}

void LossWeights::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!ok(w_mse) || !ok(w_bond) || !ok(w_slddt)) throw ValidationError("loss weights must be finite and >= 0");
  for (double e : entity_weight) {
    if (!ok(e)) throw ValidationError("entity weights must be finite and >= 0");
  }
  if (!(pair_rule.cutoff > 0.0)) throw ValidationError("pair cutoff must be positive");
}

Eigen::VectorXd atom_weights(const Structure& s, const LossWeights& w) {
  Eigen::VectorXd out = s.weight;
  for (int i = 0; i < s.size(); ++i) out(i) *= w.entity_weight[static_cast<std::size_t>(s.entity[static_cast<std::size_t>(i)])];
  return out;
}

namespace {

void add_aux(LossReport& r, const Structure& x1_hat, const Structure& target, const LossWeights& w, double chain) {
  if (w.w_bond > 0.0 && !target.bonds.empty()) {
    const LossValue b = loss_bond(x1_hat, target);
    r.bond = b.value;
    r.total += w.w_bond * b.value;
    r.grad += (w.w_bond * chain) * b.grad;
  }
  if (w.w_slddt > 0.0 && target.size() >= 2) {
    const LossValue s = loss_smooth_lddt(x1_hat, target, w.pair_rule);
    r.smooth_lddt = s.value;
    r.total += w.w_slddt * s.value;
    r.grad += (w.w_slddt * chain) * s.grad;
  }
}

}  // namespace

LossReport edm_objective(const Structure& denoised, const Structure& target, const LossWeights& w) {
  LossReport r;
  r.grad = Coords::Zero(denoised.size(), 3);
  const LossValue m = loss_mse(denoised, target, atom_weights(target, w), w.align_mse);
  r.mse = m.value;
  r.total = w.w_mse * m.value;
  r.grad += w.w_mse * m.grad;
  add_aux(r, denoised, target, w, 1.0);
  return r;
}

LossReport flow_objective(const Coords& v_pred, const Coords& x0, const Structure& x1, double t,
                          const LossWeights& w) {
  LossReport r;
  const LossValue f = loss_fm(v_pred, x0, x1.coords);
  r.mse = f.value;
  r.total = w.w_mse * f.value;
  r.grad = w.w_mse * f.grad;
  const Coords x_t = (1.0 - t) * x0 + t * x1.coords;
  const Structure x1_hat = x1.with_coords(x_t + (1.0 - t) * v_pred);
  add_aux(r, x1_hat, x1, w, 1.0 - t);
  return r;
}

}  // namespace fewstep
