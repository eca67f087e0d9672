#pragma once

#include <string_view>
#include <vector>

#include "fewstep/rng.hpp"
#include "fewstep/structure.hpp"

namespace fewstep {

enum class ToyKind { polymer_helix, polymer_chain, complex_with_ligand, gmm };

std::string_view to_string(ToyKind k);
ToyKind parse_toy_kind(std::string_view s);

struct GmmComponent {
  double weight = 1.0;
  Vec3 mean = Vec3::Zero();
  double std = 1.0;
};

/// Isotropic 3D Gaussian mixture; each atom is an independent draw.
struct GaussianMixture {
  std::vector<GmmComponent> components;
  void validate() const;
};

/// Synthetic stand-in for training data.
struct ToySpec {
  ToyKind kind = ToyKind::polymer_helix;
  // Chain lengths in atoms. For complex_with_ligand the last chain is the ligand.
  std::vector<int> chains{12};
  // Per polymer chain; empty means all protein.
  std::vector<EntityClass> chain_entities;
  double bond_length = 1.5;
  GaussianMixture mixture;
  // Per-coordinate std of thermal jitter around the reference when drawing training samples.
  double jitter = 0.0;

  int atom_count() const;
  void validate() const;
};

/// Reference structure for the polymer kinds; one mixture sample for gmm.
Structure gen_toy(const ToySpec& spec, RngStream& rng);

// reference + jitter * N(0, I); annotations copied.
Structure perturb(const Structure& reference, double jitter, RngStream& rng);

}  // namespace fewstep
