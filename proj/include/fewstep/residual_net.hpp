#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "fewstep/denoiser.hpp"
#include "fewstep/rng.hpp"

namespace fewstep {

struct NetSpec {
  Parameterization param = Parameterization::x_pred;
  int n_blocks = 6;
  int hidden = 32;
  int time_embed = 8;  // even
  int cond_dim = 0;
  NoiseLevelParams noise;
  // Per-coordinate std of x0; input/output scale of the velocity network.
  double init_std = 160.0;

  void validate() const;
};

struct ResidualBlock {
  Eigen::MatrixXd w1, w2;  // hidden x hidden
  Eigen::VectorXd b1, b2;
};

/// Weights of the per-atom stacked-residual denoiser.
///
/// Every atom runs through the same weights:
///   h0 = W_x (c_in x) + W_t emb(c_noise) + W_c[pathway] c + b0
///   h  <- h + W2 silu(W1 h + b1) + b2            (per block)
///   F  = W_o h + b_o
/// The two conditioning pathways only differ in W_c; everything else is shared.
struct NetParams {
  NetSpec spec;
  Eigen::MatrixXd w_x;   // hidden x 3
  Eigen::MatrixXd w_t;   // hidden x time_embed
  Eigen::MatrixXd w_ca;  // hidden x cond_dim
  Eigen::MatrixXd w_cb;  // hidden x cond_dim
  Eigen::VectorXd b0;
  std::vector<ResidualBlock> blocks;
  Eigen::MatrixXd w_o;  // 3 x hidden
  Eigen::VectorXd b_o;

  // Shapes consistent with spec, all entries finite.
  void validate() const;

  // Visits every tensor in a fixed order: f(name, tensor).
  template <class F>
  void for_each_tensor(F&& f) { visit(*this, f); }
  template <class F>
  void for_each_tensor(F&& f) const { visit(*this, f); }

  std::size_t parameter_count() const;
  friend bool operator==(const NetParams& a, const NetParams& b);

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    f(std::string("w_x"), self.w_x);
    f(std::string("w_t"), self.w_t);
    f(std::string("w_ca"), self.w_ca);
    f(std::string("w_cb"), self.w_cb);
    f(std::string("b0"), self.b0);
    for (std::size_t i = 0; i < self.blocks.size(); ++i) {
      const std::string p = "block" + std::to_string(i) + ".";
      f(p + "w1", self.blocks[i].w1);
      f(p + "b1", self.blocks[i].b1);
      f(p + "w2", self.blocks[i].w2);
      f(p + "b2", self.blocks[i].b2);
    }
    f(std::string("w_o"), self.w_o);
    f(std::string("b_o"), self.b_o);
  }
};

NetParams init_params(const NetSpec& spec, RngStream& rng);
// Same shapes, all zero.
NetParams zeros_like(const NetParams& p);

// Zeroes W2/b2 of every block so each block is the identity map.
void zero_residuals(NetParams& p);

/// Drops the k blocks nearest the input. ValidationError unless 0 <= k < n_blocks.
NetParams prune_blocks(const NetParams& p, int k);

// Intermediates kept for the backward pass.
struct ForwardCache {
  NoiseTime nt;
  double in_scale = 1.0;
  double out_scale = 1.0;
  Eigen::MatrixXd u;    // scaled input coords
  Eigen::RowVectorXd temb;
  Eigen::MatrixXd cond;
  Pathway pathway = Pathway::none;
  std::vector<Eigen::MatrixXd> h_in;  // input of each block
  std::vector<Eigen::MatrixXd> pre;   // W1 h + b1
  Eigen::MatrixXd h_out;
};

/// Network-backed denoiser. Output is D(x) (x-pred) or the velocity (v-pred).
Coords net_forward(const NetParams& p, const Coords& x, NoiseTime nt, const Condition& c,
                   ForwardCache* cache = nullptr);

// Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
void net_backward(const NetParams& p, const ForwardCache& cache, const Coords& d_out, NetParams& grad);

Eigen::RowVectorXd time_embedding(double c_noise, int size);

class NetDenoiser final : public Denoiser {
 public:
  explicit NetDenoiser(const NetParams& params) : params_(&params) {}
  Parameterization parameterization() const override { return params_->spec.param; }
  Coords predict(const Coords& x, NoiseTime nt, const Condition& c) const override {
    return net_forward(*params_, x, nt, c);
  }

 private:
  const NetParams* params_;
};

/// Per-atom conditioning features for a reference structure, width atoms + 4.
/// a: normalized reference distance row plus entity one-hot.
/// b: position one-hot plus entity one-hot.
Condition make_condition(const Structure& reference, Pathway pathway, double sigma_data = 16.0);
int condition_width(int n_atoms);

// Versioned text checkpoint; values printed with 17 significant digits.
std::string to_checkpoint(const NetParams& p);
NetParams parse_checkpoint(const std::string& text);
void save_checkpoint(const std::string& path, const NetParams& p);
NetParams load_checkpoint(const std::string& path);

}  // namespace fewstep
