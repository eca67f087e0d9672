#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fewstep/structure.hpp"

namespace fewstep {

struct LddtOptions {
  double inclusion_radius = 15.0;  // target distance <= radius qualifies a pair
  std::vector<double> thresholds{0.5, 1.0, 2.0, 4.0};
};

/// Superposition-free LDDT over target pairs l < m within the inclusion radius:
/// the fraction of (pair, threshold) combinations with |d_target - d_pred| <= threshold.
/// Throws UndefinedScore when no pair qualifies.
double lddt(const Structure& pred, const Structure& target, const LddtOptions& opts = {});

// Same, restricted to pairs accepted by `keep`.
double lddt_if(const Structure& pred, const Structure& target, const LddtOptions& opts,
               const std::function<bool(int, int)>& keep);

enum class InterfaceClass { prot_prot, lig_prot, dna_prot, rna_prot, intra_prot };

constexpr InterfaceClass kInterfaceClasses[] = {InterfaceClass::prot_prot, InterfaceClass::lig_prot,
                                                InterfaceClass::dna_prot, InterfaceClass::rna_prot,
                                                InterfaceClass::intra_prot};

std::string_view to_string(InterfaceClass c);

bool in_interface(const Structure& s, int l, int m, InterfaceClass c);

/// LDDT over pairs of the given class; prot-prot means protein pairs on different
/// chains, intra-prot protein pairs on the same chain. nullopt when no pair qualifies.
std::optional<double> interface_lddt(const Structure& pred, const Structure& target, InterfaceClass c,
                                     const LddtOptions& opts = {});

struct RmsdResult {
  double rmsd = 0.0;
  bool success = false;
};

// Atom indices used by rmsd_success: ligand atoms if any, else all atoms.
std::vector<int> default_rmsd_subset(const Structure& s);

/// Kabsch RMSD on a subset; success when rmsd <= threshold.
RmsdResult rmsd_success(const Structure& pred, const Structure& target, double threshold = 2.0,
                        const std::optional<std::vector<int>>& subset = std::nullopt);

struct ClashRule {
  enum class Mode { all, intra_protein, protein_ligand };
  double min_distance = 1.1;
  Mode mode = Mode::all;
};

// Number of non-bonded pairs (filtered by mode) closer than min_distance.
int count_clashes(const Structure& s, const ClashRule& rule = {});

struct ClashGridReport {
  bool exists_any = false;           // some cell clashes
  bool all_of_first_column = false;  // all samples of the first seed clash
  bool all_grid = false;             // every cell clashes
  std::vector<std::vector<int>> counts;
};

ClashGridReport clash_stats(const std::vector<std::vector<Structure>>& grid, const ClashRule& rule = {});

struct DiversityReport {
  double complex_spread = 0.0;
  std::map<InterfaceClass, double> interface_spread;
};

/// Best minus worst per-sample LDDT against the target.
DiversityReport diversity_spread(const std::vector<Structure>& samples, const Structure& target,
                                 const LddtOptions& opts = {});

struct MetricReport {
  double complex_lddt = 0.0;
  std::map<InterfaceClass, double> interface;  // absent classes omitted
  double rmsd = 0.0;
  bool success = false;
  int clashes = 0;
};

MetricReport evaluate(const Structure& pred, const Structure& target, const LddtOptions& opts = {},
                      double success_threshold = 2.0, const ClashRule& clash = {});

std::string to_json(const MetricReport& r);
std::string csv_header();
std::string csv_row(std::string_view run_id, int seed, int sample, const MetricReport& r);

}  // namespace fewstep
