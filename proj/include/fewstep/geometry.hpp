#pragma once

#include "fewstep/rng.hpp"
#include "fewstep/structure.hpp"

namespace fewstep {

struct AugmentationConfig {
  bool rotate = true;
  // Per-axis std of the isotropic Gaussian translation, Angstrom.
  double translation_std = 1.0;
};

// Uniform over SO(3): normalized quaternion of four standard normals.
Mat3 random_rotation(RngStream& rng);

Vec3 centroid(const Coords& x);
Vec3 weighted_centroid(const Coords& x, const Eigen::VectorXd& w);

// x <- R (x - centroid) + t with random R, t.
Coords center_random_augmentation(const Coords& x, RngStream& rng,
                                  const AugmentationConfig& cfg = {});
Structure center_random_augmentation(const Structure& x, RngStream& rng,
                                     const AugmentationConfig& cfg = {});

Coords apply_rigid(const Coords& x, const Mat3& rotation, const Vec3& translation);

struct Alignment {
  Structure aligned;  // pred moved onto target
  double rmsd = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

/// Weighted least-squares superposition of pred onto target (proper rotations only).
Alignment kabsch_align(const Structure& pred, const Structure& target, const Eigen::VectorXd& weights);
Alignment kabsch_align(const Structure& pred, const Structure& target);

// Rotation R and translation t minimizing sum_i w_i |R a_i + t - b_i|^2.
void kabsch(const Coords& a, const Coords& b, const Eigen::VectorXd& w, Mat3& rotation, Vec3& translation);

}  // namespace fewstep
