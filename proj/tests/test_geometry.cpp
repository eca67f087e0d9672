#include <gtest/gtest.h>

#include <cmath>

#include "fewstep/geometry.hpp"
#include "test_support.hpp"

using namespace fewstep;

namespace {

Eigen::MatrixXd distances(const Coords& x) {
  Eigen::MatrixXd d(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  }
  return d;
}

Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

}  // namespace

TEST(Augmentation, CentersWithZeroTranslation) {
  RngStream rng(1, 0);
  Coords x(1, 3);
  x << 5, 5, 5;
  const Coords y = center_random_augmentation(x, rng, AugmentationConfig{true, 0.0});
  EXPECT_LT(y.row(0).norm(), 1e-12);
}

TEST(Augmentation, PreservesDistancesAndIsDeterministic) {
  for (int trial = 0; trial < 50; ++trial) {
    RngStream rng(trial, 0);
    const Coords x = support::random_coords(9, 10.0, rng);
    RngStream a(trial, 1), b(trial, 1);
    const Coords y = center_random_augmentation(x, a);
    EXPECT_EQ(y, center_random_augmentation(x, b));
    const Eigen::MatrixXd dx = distances(x), dy = distances(y);
    EXPECT_LT(((dx - dy).array().abs() / (dx.array() + 1e-300)).maxCoeff(), 1e-12);
  }
}

TEST(Rotation, IsProperOrthogonal) {
  RngStream rng(7, 0);
  for (int i = 0; i < 100; ++i) {
    const Mat3 r = random_rotation(rng);
    EXPECT_LT((r * r.transpose() - Mat3::Identity()).norm(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  }
}

TEST(Kabsch, IdentityCase) {
  RngStream rng(2, 0);
  const Structure s = support::random_structure(6, 3.0, rng);
  const Alignment a = kabsch_align(s, s);
  EXPECT_LT(a.rmsd, 1e-12);
  EXPECT_LT((a.rotation - Mat3::Identity()).norm(), 1e-9);
}

TEST(Kabsch, RemovesRotationAndTranslation) {
  RngStream rng(3, 0);
  const Structure target = support::random_structure(8, 4.0, rng);
  const Structure pred = target.with_coords(apply_rigid(target.coords, rot_z(M_PI / 2), Vec3(1, -2, 3)));
  EXPECT_LT(kabsch_align(pred, target).rmsd, 1e-9);
}

TEST(Kabsch, BruteForceRotationGridHasNoLowerRmsd) {
  RngStream rng(4, 0);
  const Structure target = support::random_structure(5, 3.0, rng);
  Coords noisy = apply_rigid(target.coords, rot_z(0.7), Vec3::Zero()) + support::random_coords(5, 0.3, rng);
  const Structure pred = target.with_coords(noisy);
  const double best = kabsch_align(pred, target).rmsd;
  // Oracle: rotations about the three axes on a grid, after centering both.
  const Coords pc = noisy.rowwise() - centroid(noisy).transpose();
  const Coords tc = target.coords.rowwise() - centroid(target.coords).transpose();
  double grid_best = 1e300;
  const int n = 36;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const Mat3 r = (Eigen::AngleAxisd(2 * M_PI * i / n, Vec3::UnitZ()) *
                        Eigen::AngleAxisd(M_PI * j / n, Vec3::UnitY()) *
                        Eigen::AngleAxisd(2 * M_PI * k / n, Vec3::UnitZ()))
                           .toRotationMatrix();
        const Coords moved = pc * r.transpose();
        grid_best = std::min(grid_best, std::sqrt((moved - tc).rowwise().squaredNorm().mean()));
      }
    }
  }
  EXPECT_LE(best, grid_best + 1e-12);
  EXPECT_LT(grid_best - best, 0.1);
}

TEST(Kabsch, TwoAtomClosedForm) {
  // Two atoms at +-1 on x; prediction displaced by r along x on each atom, outward.
  // The optimal rotation is the identity by symmetry, rmsd = r.
  Coords t(2, 3), p(2, 3);
  t << -1, 0, 0, 1, 0, 0;
  const double r = 0.37;
  p << -1 - r, 0, 0, 1 + r, 0, 0;
  const Alignment a = kabsch_align(make_structure(p), make_structure(t));
  EXPECT_NEAR(a.rmsd, r, 1e-12);
}

TEST(Kabsch, RigidMotionInvarianceAndReflectionFix) {
  for (int trial = 0; trial < 100; ++trial) {
    RngStream rng(trial, 9);
    const Structure x = support::random_structure(2 + trial % 8, 5.0, rng);
    const Structure moved = x.with_coords(apply_rigid(x.coords, random_rotation(rng), Vec3(rng.normal(), 3, -1)));
    const Alignment a = kabsch_align(moved, x);
    EXPECT_LT(a.rmsd, 1e-9);
    EXPECT_NEAR(a.rotation.determinant(), 1.0, 1e-9);
  }
  // Mirror image of a chiral set: the best proper rotation cannot reach zero.
  Coords c(4, 3);
  c << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Coords m = c;
  m.col(2) *= -1.0;
  const Alignment a = kabsch_align(make_structure(m), make_structure(c));
  EXPECT_NEAR(a.rotation.determinant(), 1.0, 1e-9);
  EXPECT_GT(a.rmsd, 0.1);
}

TEST(Kabsch, WeightsSelectSubset) {
  RngStream rng(5, 0);
  const Structure target = support::random_structure(6, 3.0, rng);
  Coords p = apply_rigid(target.coords, rot_z(1.1), Vec3(2, 0, 0));
  p.row(5) += Eigen::RowVector3d(10, 10, 10);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(6);
  w(5) = 0.0;
  EXPECT_LT(kabsch_align(target.with_coords(p), target, w).rmsd, 1e-9);
  EXPECT_THROW(kabsch_align(target.with_coords(p), target, Eigen::VectorXd::Zero(6)), ValidationError);
}
