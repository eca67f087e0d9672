#include "fewstep/flops.hpp"

#include <cstdio>

#include "fewstep/errors.hpp"

namespace fewstep {

namespace {

constexpr double kPairBiasHeads = 16;
constexpr double kOpmHidden = 32;
constexpr double kAtomKeys = 128;

double dense(double m, double k, double n) { return 2.0 * m * k * n; }
double attention(double n, double d) { return 4.0 * n * n * d + 8.0 * n * d * d; }
double transition(double m, double c) { return 16.0 * m * c * c; }
double tri_mul(double n, double c) { return 2.0 * n * n * n * c + 12.0 * n * n * c * c; }
double tri_att(double n, double c) { return 4.0 * n * n * n * c + 8.0 * n * n * c * c; }
double pair_bias(double n, double c_pair) { return dense(n * n, c_pair, kPairBiasHeads); }

double pair_stack(const ArchConfig& a, double n) {
  const double c = a.c_pair;
  return 2.0 * tri_mul(n, c) + 2.0 * tri_att(n, c) + transition(n * n, c);
}

double atom_block(const ArchConfig& a, double atoms) {
  const double c = a.c_atom;
  return 4.0 * atoms * kAtomKeys * c + 8.0 * atoms * c * c + transition(atoms, c);
}

}  // namespace

void ArchConfig::validate() const {
  for (int v : {n_msa_blocks, n_pairformer_blocks, n_diffusion_encoder, n_diffusion_transformer, n_diffusion_decoder,
                n_cycles, n_diffusion_steps}) {
    if (v < 0) throw ValidationError("arch '" + name + "': block, cycle and step counts must be >= 0");
  }
  for (int v : {c_single, c_pair, c_atom, c_msa, c_token}) {
    if (v < 1) throw ValidationError("arch '" + name + "': widths must be >= 1");
  }
}

ArchConfig arch_preset(std::string_view name) {
  ArchConfig a;
  a.name = std::string(name);
  if (name == "protenix") return a;
  if (name == "mini" || name == "tiny") {
    a.n_msa_blocks = 1;
    a.n_pairformer_blocks = name == "mini" ? 16 : 8;
    a.n_diffusion_encoder = 1;
    a.n_diffusion_transformer = 8;
    a.n_diffusion_decoder = 1;
    a.n_diffusion_steps = 2;
    return a;
  }
  throw ValidationError("unknown preset '" + std::string(name) + "' (available: protenix, mini, tiny)");
}

std::vector<std::string> arch_preset_names() { return {"protenix", "mini", "tiny"}; }

void WorkloadShape::validate() const {
  if (n_tokens < 1 || n_msa_rows < 1 || n_atoms < 1) {
    throw ValidationError("workload: tokens, msa rows and atoms must be positive");
  }
}

double pairformer_block_flops(const ArchConfig& a, const WorkloadShape& w) {
  const double n = w.n_tokens;
  return pair_stack(a, n) + attention(n, a.c_single) + pair_bias(n, a.c_pair) + transition(n, a.c_single);
}

double msa_block_flops(const ArchConfig& a, const WorkloadShape& w) {
  const double n = w.n_tokens, s = w.n_msa_rows, cm = a.c_msa;
  const double opm = dense(s * n, cm, 2.0 * kOpmHidden) + 2.0 * s * n * n * kOpmHidden * kOpmHidden +
                     dense(n * n, kOpmHidden * kOpmHidden, a.c_pair);
  const double pwa = 2.0 * s * n * n * cm + 2.0 * dense(s * n, cm, cm);
  return opm + pwa + transition(s * n, cm) + pair_stack(a, n);
}

double diffusion_step_flops(const ArchConfig& a, const WorkloadShape& w) {
  const double n = w.n_tokens;
  const double token_block = attention(n, a.c_token) + pair_bias(n, a.c_pair) + transition(n, a.c_token);
  return (a.n_diffusion_encoder + a.n_diffusion_decoder) * atom_block(a, w.n_atoms) +
         a.n_diffusion_transformer * token_block;
}

FlopsBreakdown flops_estimate(const ArchConfig& a, const WorkloadShape& w) {
  a.validate();
  w.validate();
  FlopsBreakdown f;
  f.msa = a.n_cycles * (a.n_msa_blocks * msa_block_flops(a, w));
  f.pairformer = a.n_cycles * (a.n_pairformer_blocks * pairformer_block_flops(a, w));
  f.diffusion = a.n_diffusion_steps * diffusion_step_flops(a, w);
  f.total = f.msa + f.pairformer + f.diffusion;
  return f;
}

std::vector<FlopsRow> flops_curve(const ArchConfig& a, SweepAxis axis, const std::vector<int>& grid,
                                  const WorkloadShape& fixed) {
  if (grid.empty()) throw ValidationError("flops_curve: empty grid");
  std::vector<FlopsRow> rows;
  for (int v : grid) {
    WorkloadShape w = fixed;
    (axis == SweepAxis::tokens ? w.n_tokens : w.n_msa_rows) = v;
    rows.push_back({a.name, w, flops_estimate(a, w)});
  }
  return rows;
}

std::vector<int> figure_token_grid() { return {128, 256, 384, 512, 640, 768, 1024, 1536, 2048}; }
std::vector<int> figure_msa_grid() { return {1, 64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384}; }

std::string flops_csv_header() {
  return "model,n_tokens,n_msa,n_atoms,msa_flops,pairformer_flops,diffusion_flops,total\n";
}

std::string flops_csv_row(const FlopsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%.0f,%.0f,%.0f,%.0f\n", r.model.c_str(), r.shape.n_tokens,
                r.shape.n_msa_rows, r.shape.n_atoms, r.flops.msa, r.flops.pairformer, r.flops.diffusion,
                r.flops.total);
  return buf;
}

}  // namespace fewstep
