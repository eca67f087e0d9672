#include "fewstep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "fewstep/geometry.hpp"
#include "json.hpp"

namespace fewstep {

double lddt_if(const Structure& pred, const Structure& target, const LddtOptions& opts,
               const std::function<bool(int, int)>& keep) {
  require_same_size(pred, target, "lddt");
  if (!(opts.inclusion_radius > 0.0)) throw ValidationError("lddt: inclusion radius must be positive");
  if (opts.thresholds.empty()) throw ValidationError("lddt: no thresholds");
  const int n = target.size();
  long pairs = 0;
  long preserved = 0;
  for (int l = 0; l < n; ++l) {
    for (int m = l + 1; m < n; ++m) {
      const double dt = (target.coords.row(l) - target.coords.row(m)).norm();
      if (dt > opts.inclusion_radius || (keep && !keep(l, m))) continue;
      ++pairs;
      const double dev = std::abs(dt - (pred.coords.row(l) - pred.coords.row(m)).norm());
      for (double th : opts.thresholds) {
        if (dev <= th) ++preserved;
      }
    }
  }
  if (pairs == 0) throw UndefinedScore("lddt: no qualifying pairs");
  return static_cast<double>(preserved) / static_cast<double>(pairs * static_cast<long>(opts.thresholds.size()));
}

double lddt(const Structure& pred, const Structure& target, const LddtOptions& opts) {
  return lddt_if(pred, target, opts, nullptr);
}

std::string_view to_string(InterfaceClass c) {
  switch (c) {
    case InterfaceClass::prot_prot: return "prot-prot";
    case InterfaceClass::lig_prot: return "lig-prot";
    case InterfaceClass::dna_prot: return "dna-prot";
    case InterfaceClass::rna_prot: return "rna-prot";
    case InterfaceClass::intra_prot: return "intra-prot";
  }
  return "prot-prot";
}

bool in_interface(const Structure& s, int l, int m, InterfaceClass c) {
  const auto el = s.entity[static_cast<std::size_t>(l)];
  const auto em = s.entity[static_cast<std::size_t>(m)];
  const bool same_chain = s.chain[static_cast<std::size_t>(l)] == s.chain[static_cast<std::size_t>(m)];
  auto mixed = [&](EntityClass other) {
    return (el == EntityClass::protein && em == other) || (em == EntityClass::protein && el == other);
  };
  switch (c) {
    case InterfaceClass::prot_prot: return el == EntityClass::protein && em == EntityClass::protein && !same_chain;
    case InterfaceClass::intra_prot: return el == EntityClass::protein && em == EntityClass::protein && same_chain;
    case InterfaceClass::lig_prot: return mixed(EntityClass::ligand);
    case InterfaceClass::dna_prot: return mixed(EntityClass::dna);
    case InterfaceClass::rna_prot: return mixed(EntityClass::rna);
  }
  return false;
}

std::optional<double> interface_lddt(const Structure& pred, const Structure& target, InterfaceClass c,
                                     const LddtOptions& opts) {
  try {
    return lddt_if(pred, target, opts, [&](int l, int m) { return in_interface(target, l, m, c); });
  } catch (const UndefinedScore&) {
    return std::nullopt;
  }
}

std::vector<int> default_rmsd_subset(const Structure& s) {
  std::vector<int> idx;
  for (int i = 0; i < s.size(); ++i) {
    if (s.entity[static_cast<std::size_t>(i)] == EntityClass::ligand) idx.push_back(i);
  }
  if (idx.empty()) {
    for (int i = 0; i < s.size(); ++i) idx.push_back(i);
  }
  return idx;
}

RmsdResult rmsd_success(const Structure& pred, const Structure& target, double threshold,
                        const std::optional<std::vector<int>>& subset) {
  require_same_size(pred, target, "rmsd_success");
  const std::vector<int> idx = subset ? *subset : default_rmsd_subset(target);
  if (idx.empty()) throw ValidationError("rmsd_success: empty atom subset");
  Coords a(static_cast<Eigen::Index>(idx.size()), 3), b(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= pred.size()) throw ValidationError("rmsd_success: subset index out of range");
    a.row(static_cast<Eigen::Index>(i)) = pred.coords.row(idx[i]);
    b.row(static_cast<Eigen::Index>(i)) = target.coords.row(idx[i]);
  }
  const auto al = kabsch_align(make_structure(a), make_structure(b));
  return {al.rmsd, al.rmsd <= threshold};
}

int count_clashes(const Structure& s, const ClashRule& rule) {
  std::set<std::pair<int, int>> bonded;
  for (const auto& b : s.bonds) bonded.insert({b.l, b.m});
  int count = 0;
  for (int l = 0; l < s.size(); ++l) {
    for (int m = l + 1; m < s.size(); ++m) {
      if (bonded.count({l, m})) continue;
      const auto el = s.entity[static_cast<std::size_t>(l)];
      const auto em = s.entity[static_cast<std::size_t>(m)];
      if (rule.mode == ClashRule::Mode::intra_protein && (el != EntityClass::protein || em != EntityClass::protein)) {
        continue;
      }
      if (rule.mode == ClashRule::Mode::protein_ligand &&
          !((el == EntityClass::protein && em == EntityClass::ligand) ||
            (el == EntityClass::ligand && em == EntityClass::protein))) {
        continue;
      }
      if ((s.coords.row(l) - s.coords.row(m)).norm() < rule.min_distance) ++count;
    }
  }
  return count;
}

ClashGridReport clash_stats(const std::vector<std::vector<Structure>>& grid, const ClashRule& rule) {
  if (grid.empty() || grid.front().empty()) throw ValidationError("clash_stats: empty grid");
  ClashGridReport r;
  r.all_grid = true;
  for (const auto& row : grid) {
    auto& counts = r.counts.emplace_back();
    for (const auto& s : row) {
      counts.push_back(count_clashes(s, rule));
      r.exists_any = r.exists_any || counts.back() > 0;
      r.all_grid = r.all_grid && counts.back() > 0;
    }
  }
  r.all_of_first_column =
      std::all_of(r.counts.front().begin(), r.counts.front().end(), [](int c) { return c > 0; });
  return r;
}

DiversityReport diversity_spread(const std::vector<Structure>& samples, const Structure& target,
                                 const LddtOptions& opts) {
  if (samples.size() < 2) throw ValidationError("diversity_spread: need at least 2 samples");
  DiversityReport r;
  std::vector<double> scores;
  for (const auto& s : samples) scores.push_back(lddt(s, target, opts));
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  r.complex_spread = *hi - *lo;
  for (auto c : kInterfaceClasses) {
    std::vector<double> v;
    for (const auto& s : samples) {
      if (auto x = interface_lddt(s, target, c, opts)) v.push_back(*x);
    }
    if (v.size() == samples.size()) {
      const auto [a, b] = std::minmax_element(v.begin(), v.end());
      r.interface_spread[c] = *b - *a;
    }
  }
  return r;
}

MetricReport evaluate(const Structure& pred, const Structure& target, const LddtOptions& opts,
                      double success_threshold, const ClashRule& clash) {
  MetricReport r;
  r.complex_lddt = lddt(pred, target, opts);
  for (auto c : kInterfaceClasses) {
    if (auto v = interface_lddt(pred, target, c, opts)) r.interface[c] = *v;
  }
  const auto rs = rmsd_success(pred, target, success_threshold);
  r.rmsd = rs.rmsd;
  r.success = rs.success;
  r.clashes = count_clashes(pred, clash);
  return r;
}

std::string to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["complex_lddt"] = r.complex_lddt;
  nlohmann::ordered_json iface = nlohmann::ordered_json::object();
  for (const auto& [c, v] : r.interface) iface[std::string(to_string(c))] = v;
  j["interface_lddt"] = iface;
  j["rmsd"] = r.rmsd;
  j["success"] = r.success;
  j["clashes"] = r.clashes;
  return j.dump(2);
}

std::string csv_header() {
  std::string h = "run_id,seed,sample,complex_lddt";
  for (auto c : kInterfaceClasses) h += "," + std::string(to_string(c));
  return h + ",rmsd,success,clashes\n";
}

std::string csv_row(std::string_view run_id, int seed, int sample, const MetricReport& r) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string row = std::string(run_id) + "," + std::to_string(seed) + "," + std::to_string(sample) + "," +
                    num(r.complex_lddt);
  for (auto c : kInterfaceClasses) {
    auto it = r.interface.find(c);
    row += "," + (it == r.interface.end() ? std::string() : num(it->second));
  }
  return row + "," + num(r.rmsd) + "," + (r.success ? "1" : "0") + "," + std::to_string(r.clashes) + "\n";
}

}  // namespace fewstep
