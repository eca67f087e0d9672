#include "fewstep/residual_net.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fewstep {

void NetSpec::validate() const {
  if (n_blocks < 0) throw ValidationError("n_blocks must be >= 0");
  if (hidden < 1 || time_embed < 2 || time_embed % 2 != 0 || cond_dim < 0) {
    throw ValidationError("network widths must be >= 1 and time_embed even");
  }
  if (!(init_std > 0.0)) throw ValidationError("init_std must be positive");
  noise.validate();
}

void NetParams::validate() const {
  spec.validate();
  const auto h = spec.hidden;
  auto check = [&](const Eigen::MatrixXd& m, int r, int c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw ValidationError(std::string("tensor ") + name + " has shape " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }
    if (!m.allFinite()) throw ValidationError(std::string("tensor ") + name + " is not finite");
  };
  check(w_x, h, 3, "w_x");
  check(w_t, h, spec.time_embed, "w_t");
  check(w_ca, h, spec.cond_dim, "w_ca");
  check(w_cb, h, spec.cond_dim, "w_cb");
  check(b0, h, 1, "b0");
  if (static_cast<int>(blocks.size()) != spec.n_blocks) throw ValidationError("block count does not match spec");
  for (const auto& b : blocks) {
    check(b.w1, h, h, "w1");
    check(b.w2, h, h, "w2");
    check(b.b1, h, 1, "b1");
    check(b.b2, h, 1, "b2");
  }
  check(w_o, 3, h, "w_o");
  check(b_o, 3, 1, "b_o");
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

bool operator==(const NetParams& a, const NetParams& b) {
  if (a.spec.param != b.spec.param || a.spec.n_blocks != b.spec.n_blocks || a.spec.hidden != b.spec.hidden ||
      a.spec.time_embed != b.spec.time_embed || a.spec.cond_dim != b.spec.cond_dim ||
      a.spec.init_std != b.spec.init_std || a.spec.noise.sigma_data != b.spec.noise.sigma_data ||
      a.spec.noise.sigma_max != b.spec.noise.sigma_max || a.spec.noise.sigma_min != b.spec.noise.sigma_min ||
      a.spec.noise.rho != b.spec.noise.rho) {
    return false;
  }
  std::vector<const Eigen::MatrixXd*> ma;
  std::vector<const Eigen::VectorXd*> va;
  a.for_each_tensor([&](const std::string&, const auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::MatrixXd>) ma.push_back(&t);
    else va.push_back(&t);
  });
  std::size_t im = 0, iv = 0;
  bool same = true;
  b.for_each_tensor([&](const std::string&, const auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::MatrixXd>) {
      const auto& o = *ma[im++];
      same = same && o.rows() == t.rows() && o.cols() == t.cols() && o == t;
    } else {
      const auto& o = *va[iv++];
      same = same && o.size() == t.size() && o == t;
    }
  });
  return same;
}

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, double std, RngStream& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = std * rng.normal();
  }
  return m;
}

double silu(double a) { return a / (1.0 + std::exp(-a)); }

double silu_grad(double a) {
  const double s = 1.0 / (1.0 + std::exp(-a));
  return s * (1.0 + a * (1.0 - s));
}

}  // namespace

NetParams init_params(const NetSpec& spec, RngStream& rng) {
  spec.validate();
  const int h = spec.hidden;
  NetParams p;
  p.spec = spec;
  p.w_x = gaussian(h, 3, 1.0 / std::sqrt(3.0), rng);
  p.w_t = gaussian(h, spec.time_embed, 1.0 / std::sqrt(spec.time_embed), rng);
  const double cstd = spec.cond_dim > 0 ? 1.0 / std::sqrt(spec.cond_dim) : 0.0;
  p.w_ca = gaussian(h, spec.cond_dim, cstd, rng);
  p.w_cb = gaussian(h, spec.cond_dim, cstd, rng);
  p.b0 = Eigen::VectorXd::Zero(h);
  for (int b = 0; b < spec.n_blocks; ++b) {
    ResidualBlock blk;
    blk.w1 = gaussian(h, h, 1.0 / std::sqrt(h), rng);
    blk.b1 = Eigen::VectorXd::Zero(h);
    blk.w2 = gaussian(h, h, 0.5 / std::sqrt(h), rng);
    blk.b2 = Eigen::VectorXd::Zero(h);
    p.blocks.push_back(std::move(blk));
  }
  p.w_o = gaussian(3, h, 0.1 / std::sqrt(h), rng);
  p.b_o = Eigen::VectorXd::Zero(3);
  return p;
}

NetParams zeros_like(const NetParams& p) {
  NetParams z = p;
  z.for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
  return z;
}

void zero_residuals(NetParams& p) {
  for (auto& b : p.blocks) {
    b.w2.setZero();
    b.b2.setZero();
  }
}

NetParams prune_blocks(const NetParams& p, int k) {
  if (k < 0 || k >= p.spec.n_blocks) {
    throw ValidationError("prune_blocks: k = " + std::to_string(k) + " must satisfy 0 <= k < n_blocks = " +
                          std::to_string(p.spec.n_blocks));
  }
  NetParams out = p;
  out.blocks.erase(out.blocks.begin(), out.blocks.begin() + k);
  out.spec.n_blocks -= k;
  return out;
}

Eigen::RowVectorXd time_embedding(double c_noise, int size) {
  Eigen::RowVectorXd e(size);
  for (int k = 0; k < size / 2; ++k) {
    const double w = 0.5 * std::pow(2.0, k);
    e(2 * k) = std::sin(w * c_noise);
    e(2 * k + 1) = std::cos(w * c_noise);
  }
  return e;
}

Coords net_forward(const NetParams& p, const Coords& x, NoiseTime nt, const Condition& c, ForwardCache* cache) {
  const auto& spec = p.spec;
  const Eigen::Index n = x.rows();
  const bool use_cond = c.pathway != Pathway::none && spec.cond_dim > 0;
  if (use_cond && (c.features.rows() != n || c.features.cols() != spec.cond_dim)) {
    throw ValidationError("net_forward: condition features are " + std::to_string(c.features.rows()) + "x" +
                          std::to_string(c.features.cols()) + ", expected " + std::to_string(n) + "x" +
                          std::to_string(spec.cond_dim));
  }
  double in_scale = 1.0, out_scale = 1.0, skip = 0.0, c_noise = 0.0;
  if (spec.param == Parameterization::x_pred) {
    const EdmPrecond pc = edm_precond(nt.sigma, spec.noise.sigma_data);
    in_scale = pc.c_in;
    out_scale = pc.c_out;
    skip = pc.c_skip;
    c_noise = pc.c_noise;
  } else {
    const double s0 = spec.init_std, sd = spec.noise.sigma_data, t = nt.t;
    in_scale = 1.0 / std::sqrt((1.0 - t) * (1.0 - t) * s0 * s0 + t * t * sd * sd);
    out_scale = std::sqrt(s0 * s0 + sd * sd);
    c_noise = t;
  }

  Eigen::MatrixXd u = in_scale * x;
  Eigen::RowVectorXd temb = time_embedding(c_noise, spec.time_embed);
  Eigen::MatrixXd h = u * p.w_x.transpose();
  h.rowwise() += temb * p.w_t.transpose() + p.b0.transpose();
  if (use_cond) h += c.features * (c.pathway == Pathway::a ? p.w_ca : p.w_cb).transpose();

  if (cache) {
    cache->h_in.clear();
    cache->pre.clear();
  }
  for (const auto& blk : p.blocks) {
    Eigen::MatrixXd pre = h * blk.w1.transpose();
    pre.rowwise() += blk.b1.transpose();
    const Eigen::MatrixXd g = pre.unaryExpr([](double a) { return silu(a); });
    Eigen::MatrixXd next = h + g * blk.w2.transpose();
    next.rowwise() += blk.b2.transpose();
    if (cache) {
      cache->h_in.push_back(std::move(h));
      cache->pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  Eigen::MatrixXd f = h * p.w_o.transpose();
  f.rowwise() += p.b_o.transpose();

  if (cache) {
    cache->nt = nt;
    cache->in_scale = in_scale;
    cache->out_scale = out_scale;
    cache->u = std::move(u);
    cache->temb = temb;
    cache->cond = use_cond ? c.features : Eigen::MatrixXd();
    cache->pathway = use_cond ? c.pathway : Pathway::none;
    cache->h_out = h;
  }
  if (spec.param == Parameterization::x_pred) return skip * x + out_scale * f;
  return out_scale * f;
}

void net_backward(const NetParams& p, const ForwardCache& cache, const Coords& d_out, NetParams& grad) {
  const Eigen::MatrixXd df = cache.out_scale * d_out;
  grad.w_o += df.transpose() * cache.h_out;
  grad.b_o += df.colwise().sum().transpose();
  Eigen::MatrixXd dh = df * p.w_o;
  for (std::size_t i = p.blocks.size(); i-- > 0;) {
    const auto& blk = p.blocks[i];
    auto& gblk = grad.blocks[i];
    const Eigen::MatrixXd& pre = cache.pre[i];
    const Eigen::MatrixXd g = pre.unaryExpr([](double a) { return silu(a); });
    gblk.w2 += dh.transpose() * g;
    gblk.b2 += dh.colwise().sum().transpose();
    const Eigen::MatrixXd dpre = (dh * blk.w2).cwiseProduct(pre.unaryExpr([](double a) { return silu_grad(a); }));
    gblk.w1 += dpre.transpose() * cache.h_in[i];
    gblk.b1 += dpre.colwise().sum().transpose();
    dh += dpre * blk.w1;
  }
  grad.w_x += dh.transpose() * cache.u;
  const Eigen::VectorXd dsum = dh.colwise().sum().transpose();
  grad.w_t += dsum * cache.temb;
  grad.b0 += dsum;
  if (cache.pathway == Pathway::a) grad.w_ca += dh.transpose() * cache.cond;
  if (cache.pathway == Pathway::b) grad.w_cb += dh.transpose() * cache.cond;
}

int condition_width(int n_atoms) { return n_atoms + 4; }

Condition make_condition(const Structure& reference, Pathway pathway, double sigma_data) {
  const int n = reference.size();
  Condition c;
  c.pathway = pathway;
  if (pathway == Pathway::none) return c;
  c.features = Eigen::MatrixXd::Zero(n, condition_width(n));
  for (int i = 0; i < n; ++i) {
    if (pathway == Pathway::a) {
      for (int j = 0; j < n; ++j) {
        c.features(i, j) = (reference.coords.row(i) - reference.coords.row(j)).norm() / sigma_data;
      }
    } else {
      c.features(i, i) = 1.0;
    }
    c.features(i, n + static_cast<int>(reference.entity[static_cast<std::size_t>(i)])) = 1.0;
  }
  return c;
}

namespace {

constexpr const char* kMagic = "fewstep-netparams";
constexpr int kVersion = 1;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_checkpoint(const NetParams& p) {
  const auto& s = p.spec;
  std::string out = std::string(kMagic) + " " + std::to_string(kVersion) + "\n";
  out += "param " + std::string(to_string(s.param)) + "\n";
  out += "n_blocks " + std::to_string(s.n_blocks) + "\n";
  out += "hidden " + std::to_string(s.hidden) + "\n";
  out += "time_embed " + std::to_string(s.time_embed) + "\n";
  out += "cond_dim " + std::to_string(s.cond_dim) + "\n";
  out += "sigma_data " + fmt17(s.noise.sigma_data) + "\n";
  out += "sigma_max " + fmt17(s.noise.sigma_max) + "\n";
  out += "sigma_min " + fmt17(s.noise.sigma_min) + "\n";
  out += "rho " + fmt17(s.noise.rho) + "\n";
  out += "init_std " + fmt17(s.init_std) + "\n";
  p.for_each_tensor([&](const std::string& name, const auto& t) {
    out += "tensor " + name + " " + std::to_string(t.rows()) + " " + std::to_string(t.cols()) + "\n";
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        if (j) out += ' ';
        out += fmt17(t(i, j));
      }
      out += '\n';
    }
  });
  out += "end\n";
  return out;
}

NetParams parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != kMagic) throw ValidationError("not a fewstep checkpoint");
  if (version != kVersion) throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  auto real = [&](const char* key) {
    std::string k, v;
    if (!(in >> k >> v) || k != key) throw ValidationError(std::string("checkpoint: expected ") + key);
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size()) throw ValidationError(std::string("checkpoint: bad value for ") + key);
    return d;
  };
  NetSpec spec;
  std::string k, v;
  if (!(in >> k >> v) || k != "param") throw ValidationError("checkpoint: expected param");
  spec.param = parse_parameterization(v);
  spec.n_blocks = static_cast<int>(real("n_blocks"));
  spec.hidden = static_cast<int>(real("hidden"));
  spec.time_embed = static_cast<int>(real("time_embed"));
  spec.cond_dim = static_cast<int>(real("cond_dim"));
  spec.noise.sigma_data = real("sigma_data");
  spec.noise.sigma_max = real("sigma_max");
  spec.noise.sigma_min = real("sigma_min");
  spec.noise.rho = real("rho");
  spec.init_std = real("init_std");

  NetParams p;
  p.spec = spec;
  p.blocks.resize(static_cast<std::size_t>(std::max(spec.n_blocks, 0)));
  p.for_each_tensor([&](const std::string& name, auto& t) {
    std::string tag, got;
    Eigen::Index r = 0, c = 0;
    if (!(in >> tag >> got >> r >> c) || tag != "tensor" || got != name) {
      throw ValidationError("checkpoint: expected tensor " + name);
    }
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::VectorXd>) {
      if (c != 1) throw ValidationError("checkpoint: vector " + name + " must have one column");
      t.resize(r);
    } else {
      t.resize(r, c);
    }
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) {
        std::string s;
        if (!(in >> s)) throw ValidationError("checkpoint: truncated tensor " + name);
        char* end = nullptr;
        t(i, j) = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size()) throw ValidationError("checkpoint: bad value in " + name);
      }
    }
  });
  if (!(in >> word) || word != "end") throw ValidationError("checkpoint: missing end marker");
  p.validate();
  return p;
}

void save_checkpoint(const std::string& path, const NetParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + path);
  out << to_checkpoint(p);
}

NetParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace fewstep
