#include "fewstep/toy.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace fewstep {

std::string_view to_string(ToyKind k) {
  switch (k) {
    case ToyKind::polymer_helix: return "polymer-helix";
    case ToyKind::polymer_chain: return "polymer-chain";
    case ToyKind::complex_with_ligand: return "complex-with-ligand";
    case ToyKind::gmm: return "gmm";
  }
  return "polymer-helix";
}

ToyKind parse_toy_kind(std::string_view s) {
  if (s == "polymer-helix") return ToyKind::polymer_helix;
  if (s == "polymer-chain") return ToyKind::polymer_chain;
  if (s == "complex-with-ligand") return ToyKind::complex_with_ligand;
  if (s == "gmm") return ToyKind::gmm;
  throw ValidationError("unknown toy kind '" + std::string(s) + "'");
}

void GaussianMixture::validate() const {
  if (components.empty()) throw ValidationError("mixture has no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0) || !(c.std > 0.0) || !c.mean.allFinite()) {
      throw ValidationError("mixture component needs weight >= 0, std > 0 and a finite mean");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
}

int ToySpec::atom_count() const { return std::accumulate(chains.begin(), chains.end(), 0); }

void ToySpec::validate() const {
  if (chains.empty()) throw ValidationError("toy spec needs at least one chain");
  for (int c : chains) {
    if (c < 1) throw ValidationError("chain lengths must be positive");
  }
  if (jitter < 0.0 || !std::isfinite(jitter)) throw ValidationError("jitter must be finite and >= 0");
  if (kind == ToyKind::gmm) {
    mixture.validate();
    return;
  }
  if (!(bond_length > 0.0)) throw ValidationError("bond length must be positive");
  if (kind == ToyKind::complex_with_ligand && chains.size() < 2) {
    throw ValidationError("complex-with-ligand needs a polymer chain and a ligand chain");
  }
  const std::size_t n_polymer = kind == ToyKind::complex_with_ligand ? chains.size() - 1 : chains.size();
  for (std::size_t i = 0; i < n_polymer; ++i) {
    if (chains[i] < 2) throw ValidationError("bonded chains need at least 2 atoms");
  }
  if (!chain_entities.empty() && chain_entities.size() != n_polymer) {
    throw ValidationError("chain_entities must list one class per polymer chain");
  }
}

namespace {

Vec3 random_unit(RngStream& rng) {
  Vec3 v;
  do {
    for (int k = 0; k < 3; ++k) v(k) = rng.normal();
  } while (v.norm() < 1e-9);
  return v.normalized();
}

struct Builder {
  std::vector<Vec3> pos;
  std::vector<EntityClass> entity;
  std::vector<int> chain;
  std::vector<Bond> bonds;

  int add(const Vec3& p, EntityClass e, int c) {
    pos.push_back(p);
    entity.push_back(e);
    chain.push_back(c);
    return static_cast<int>(pos.size()) - 1;
  }

  bool clear_of(const Vec3& p, double min_dist, int skip) const {
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (static_cast<int>(i) == skip) continue;
      if ((pos[i] - p).norm() < min_dist) return false;
    }
    return true;
  }

  Structure finish() const {
    Coords c(static_cast<Eigen::Index>(pos.size()), 3);
    for (std::size_t i = 0; i < pos.size(); ++i) c.row(static_cast<Eigen::Index>(i)) = pos[i].transpose();
    Structure s = make_structure(std::move(c));
    s.entity = entity;
    s.chain = chain;
    s.bonds = bonds;
    s.coords.rowwise() -= centroid(s.coords).transpose();
    return s;
  }

  static Vec3 centroid(const Coords& x) { return x.colwise().mean().transpose(); }
};

// Ideal helix with exact consecutive spacing `b`, axis parallel to z through `origin`.
void add_helix(Builder& bld, int n, double b, const Vec3& origin, EntityClass e, int chain) {
  const double theta = 100.0 * std::numbers::pi / 180.0;
  const double radius = 0.6 * b;
  const double chord = 2.0 * radius * std::sin(theta / 2.0);
  const double rise = std::sqrt(b * b - chord * chord);
  int prev = -1;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = origin + Vec3(radius * std::cos(theta * i), radius * std::sin(theta * i), rise * i);
    const int idx = bld.add(p, e, chain);
    if (prev >= 0) bld.bonds.push_back({prev, idx});
    prev = idx;
  }
}

// Self-avoiding walk with exact step `b`; `dir_hint` biases the first step.
void add_walk(Builder& bld, int n, double b, int anchor, const Vec3& dir_hint, EntityClass e, int chain,
              RngStream& rng) {
  Vec3 prev_dir = dir_hint.normalized();
  int prev = anchor;
  for (int i = 0; i < n; ++i) {
    Vec3 p;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const Vec3 d = (prev_dir + 0.9 * random_unit(rng)).normalized();
      if (d.dot(prev_dir) < 0.0) continue;
      p = prev >= 0 ? Vec3(bld.pos[static_cast<std::size_t>(prev)] + b * d) : Vec3::Zero();
      placed = bld.clear_of(p, 1.3 * b, prev);
      if (placed) prev_dir = d;
    }
    if (!placed) {
      // Straight extension stays clear in practice; keep the exact bond length.
      p = bld.pos[static_cast<std::size_t>(prev)] + b * prev_dir;
    }
    const int idx = bld.add(p, e, chain);
    if (prev >= 0) bld.bonds.push_back({prev, idx});
    prev = idx;
  }
}

}  // namespace

Structure gen_toy(const ToySpec& spec, RngStream& rng) {
  spec.validate();
  Builder bld;
  const auto polymer_entity = [&](std::size_t c) {
    return spec.chain_entities.empty() ? EntityClass::protein : spec.chain_entities[c];
  };
  switch (spec.kind) {
    case ToyKind::gmm: {
      const auto& comps = spec.mixture.components;
      for (int i = 0; i < spec.atom_count(); ++i) {
        double u = rng.uniform();
        std::size_t k = 0;
        while (k + 1 < comps.size() && u >= comps[k].weight) {
          u -= comps[k].weight;
          ++k;
        }
        Vec3 p;
        for (int a = 0; a < 3; ++a) p(a) = comps[k].mean(a) + comps[k].std * rng.normal();
        bld.add(p, EntityClass::protein, 0);
      }
      Structure s = make_structure(Coords(bld.pos.size(), 3));
      for (std::size_t i = 0; i < bld.pos.size(); ++i) s.coords.row(static_cast<Eigen::Index>(i)) = bld.pos[i].transpose();
      return s;
    }
    case ToyKind::polymer_helix:
      for (std::size_t c = 0; c < spec.chains.size(); ++c) {
        add_helix(bld, spec.chains[c], spec.bond_length, Vec3(12.0 * static_cast<double>(c), 0, 0),
                  polymer_entity(c), static_cast<int>(c));
      }
      break;
    case ToyKind::polymer_chain:
      for (std::size_t c = 0; c < spec.chains.size(); ++c) {
        const int start = bld.add(Vec3(12.0 * static_cast<double>(c), 0, 0), polymer_entity(c), static_cast<int>(c));
        add_walk(bld, spec.chains[c] - 1, spec.bond_length, start, random_unit(rng), polymer_entity(c),
                 static_cast<int>(c), rng);
      }
      break;
    case ToyKind::complex_with_ligand: {
      const std::size_t n_polymer = spec.chains.size() - 1;
      for (std::size_t c = 0; c < n_polymer; ++c) {
        add_helix(bld, spec.chains[c], spec.bond_length, Vec3(12.0 * static_cast<double>(c), 0, 0),
                  polymer_entity(c), static_cast<int>(c));
      }
      // Ligand bonded to the middle atom of the first chain, growing away from the helix axis.
      const int parent = spec.chains[0] / 2;
      const Vec3 p = bld.pos[static_cast<std::size_t>(parent)];
      Vec3 radial(p(0), p(1), 0.0);
      if (radial.norm() < 1e-9) radial = Vec3::UnitX();
      radial.normalize();
      add_walk(bld, spec.chains.back(), spec.bond_length, parent, radial, EntityClass::ligand,
               static_cast<int>(n_polymer), rng);
      break;
    }
  }
  return bld.finish();
}

Structure perturb(const Structure& reference, double jitter, RngStream& rng) {
  Coords c = reference.coords;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (int k = 0; k < 3; ++k) c(i, k) += jitter * rng.normal();
  }
  return reference.with_coords(std::move(c));
}

}  // namespace fewstep
