#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fewstep/errors.hpp"

namespace fewstep {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
// One row per atom, Angstrom.
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3>;

enum class EntityClass { protein, ligand, dna, rna };

std::string_view to_string(EntityClass e);
std::optional<EntityClass> parse_entity(std::string_view s);

struct Bond {
  int l = 0;
  int m = 0;
  friend bool operator==(const Bond&, const Bond&) = default;
};

/// Atom coordinates plus the per-atom annotations every module needs.
struct Structure {
  Coords coords;
  std::vector<EntityClass> entity;
  std::vector<int> chain;
  std::vector<Bond> bonds;  // l < m
  Eigen::VectorXd weight;

  int size() const { return static_cast<int>(coords.rows()); }

  // Throws ValidationError when an invariant does not hold.
  void validate() const;

  // Same annotations, new coordinates.
  Structure with_coords(Coords c) const;

  bool has_entity(EntityClass e) const;

  friend bool operator==(const Structure& a, const Structure& b);
};

// Protein, chain 0, unit weights, no bonds.
Structure make_structure(Coords coords);

void require_same_size(const Structure& a, const Structure& b, std::string_view what);

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& msg, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Text format: `idx chain entity x y z weight` per atom, then `BOND l m`.
/// Reals are printed with 17 significant digits, so a write/read cycle is exact.
std::string to_text(const Structure& s);
Structure parse_structure(std::string_view text);

Structure read_structure(const std::string& path);
void write_structure(const std::string& path, const Structure& s);

}  // namespace fewstep
