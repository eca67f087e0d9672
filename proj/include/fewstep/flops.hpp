#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fewstep {

/// Block counts and widths of an AF3-style predictor.
struct ArchConfig {
  std::string name = "custom";
  int n_msa_blocks = 4;
  int n_pairformer_blocks = 48;
  int n_diffusion_encoder = 3;
  int n_diffusion_transformer = 24;
  int n_diffusion_decoder = 3;
  int c_single = 384;
  int c_pair = 128;
  int c_atom = 128;
  int c_msa = 64;
  int c_token = 768;  // diffusion transformer width
  int n_cycles = 4;
  int n_diffusion_steps = 200;

  void validate() const;
};

ArchConfig arch_preset(std::string_view name);
std::vector<std::string> arch_preset_names();  // protenix, mini, tiny

struct WorkloadShape {
  int n_tokens = 384;
  int n_msa_rows = 2048;
  int n_atoms = 8832;

  void validate() const;
};

struct FlopsBreakdown {
  double msa = 0.0;         // n_cycles * MSA module
  double pairformer = 0.0;  // n_cycles * pairformer stack
  double diffusion = 0.0;   // n_diffusion_steps * diffusion module
  double total = 0.0;       // msa + pairformer + diffusion
};

/// Counting rules (all values are integers held exactly in a double):
///   dense (m x k)(k x n)              2 m k n
///   attention, N items, width d       4 N^2 d + 8 N d^2 (q, k, v, out projections)
///   transition, M rows, width c       16 M c^2 (expansion 4, two dense maps)
///   triangle multiplication, N, c     2 N^3 c + 12 N^2 c^2
///   triangle attention, N, c          4 N^3 c + 8 N^2 c^2
///   pair bias, N, c_pair              2 N^2 c_pair * 16 heads
///   outer product mean, S, N          2 S N c_msa * 64 + 2 S N^2 32^2 + 2 N^2 32^2 c_pair
///   pair-weighted averaging, S, N     2 S N^2 c_msa + 4 S N c_msa^2
///   local atom attention, A atoms     4 A 128 c_atom + 8 A c_atom^2 (32-query / 128-key windows)
/// A pair stack is 2 triangle multiplications + 2 triangle attentions + a pair transition.
/// Pairformer block: pair stack + single attention with pair bias + single transition.
/// MSA block: outer product mean + pair-weighted averaging + MSA transition + pair stack.
/// Diffusion step: (encoder + decoder) atom blocks + token transformer blocks with pair bias.
FlopsBreakdown flops_estimate(const ArchConfig& a, const WorkloadShape& w);

// Per-block costs, exposed for tests.
double pairformer_block_flops(const ArchConfig& a, const WorkloadShape& w);
double msa_block_flops(const ArchConfig& a, const WorkloadShape& w);
double diffusion_step_flops(const ArchConfig& a, const WorkloadShape& w);

enum class SweepAxis { tokens, msa };

struct FlopsRow {
  std::string model;
  WorkloadShape shape;
  FlopsBreakdown flops;
};

/// One row per grid value, substituted into `fixed` along the axis.
std::vector<FlopsRow> flops_curve(const ArchConfig& a, SweepAxis axis, const std::vector<int>& grid,
                                  const WorkloadShape& fixed);

// Token and MSA grids used for the preset comparison plots.
std::vector<int> figure_token_grid();
std::vector<int> figure_msa_grid();

std::string flops_csv_header();
std::string flops_csv_row(const FlopsRow& r);

}  // namespace fewstep
