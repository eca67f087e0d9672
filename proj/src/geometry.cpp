#include "fewstep/geometry.hpp"

#include <cmath>

namespace fewstep {

Mat3 random_rotation(RngStream& rng) {
  Eigen::Vector4d q;
  do {
    for (int i = 0; i < 4; ++i) q(i) = rng.normal();
  } while (q.norm() < 1e-12);
  q.normalize();
  return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
}

Vec3 centroid(const Coords& x) { return x.colwise().mean().transpose(); }

Vec3 weighted_centroid(const Coords& x, const Eigen::VectorXd& w) {
  return (x.transpose() * w) / w.sum();
}

Coords apply_rigid(const Coords& x, const Mat3& rotation, const Vec3& translation) {
  Coords out = x * rotation.transpose();
  out.rowwise() += translation.transpose();
  return out;
}

Coords center_random_augmentation(const Coords& x, RngStream& rng, const AugmentationConfig& cfg) {
  const Mat3 rot = cfg.rotate ? random_rotation(rng) : Mat3::Identity();
  Vec3 trans;
  for (int k = 0; k < 3; ++k) trans(k) = cfg.translation_std * rng.normal();
  Coords centered = x.rowwise() - centroid(x).transpose();
  return apply_rigid(centered, rot, trans);
}

Structure center_random_augmentation(const Structure& x, RngStream& rng, const AugmentationConfig& cfg) {
  return x.with_coords(center_random_augmentation(x.coords, rng, cfg));
}

void kabsch(const Coords& a, const Coords& b, const Eigen::VectorXd& w, Mat3& rotation, Vec3& translation) {
  if (a.rows() != b.rows() || w.size() != a.rows()) throw ValidationError("kabsch: shape mismatch");
  if ((w.array() < 0.0).any() || !(w.sum() > 0.0)) {
    throw ValidationError("kabsch: weights must be nonnegative and not all zero");
  }
  const Vec3 ca = weighted_centroid(a, w);
  const Vec3 cb = weighted_centroid(b, w);
  const Coords a0 = a.rowwise() - ca.transpose();
  const Coords b0 = b.rowwise() - cb.transpose();
  const Mat3 h = a0.transpose() * w.asDiagonal() * b0;
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  // Singular values come sorted; flip the weakest axis to exclude reflections.
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  rotation = v * d * u.transpose();
  translation = cb - rotation * ca;
}

Alignment kabsch_align(const Structure& pred, const Structure& target, const Eigen::VectorXd& weights) {
  require_same_size(pred, target, "kabsch_align");
  Alignment out;
  kabsch(pred.coords, target.coords, weights, out.rotation, out.translation);
  out.aligned = pred.with_coords(apply_rigid(pred.coords, out.rotation, out.translation));
  const Eigen::VectorXd sq = (out.aligned.coords - target.coords).rowwise().squaredNorm();
  out.rmsd = std::sqrt(weights.dot(sq) / weights.sum());
  return out;
}

Alignment kabsch_align(const Structure& pred, const Structure& target) {
  return kabsch_align(pred, target, Eigen::VectorXd::Ones(pred.size()));
}

}  // namespace fewstep
