#include <fstream>
#include <sstream>

#include "fewstep/harness.hpp"
#include "json.hpp"

namespace fewstep {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kEntityNames[] = {"protein", "ligand", "dna", "rna"};

std::string_view clash_mode_name(ClashRule::Mode m) {
  switch (m) {
    case ClashRule::Mode::all: return "all";
    case ClashRule::Mode::intra_protein: return "intra-protein";
    case ClashRule::Mode::protein_ligand: return "protein-ligand";
  }
  return "all";
}

ClashRule::Mode parse_clash_mode(std::string_view s) {
  if (s == "all") return ClashRule::Mode::all;
  if (s == "intra-protein") return ClashRule::Mode::intra_protein;
  if (s == "protein-ligand") return ClashRule::Mode::protein_ligand;
  throw ValidationError("unknown clash mode '" + std::string(s) + "' (all, intra-protein, protein-ligand)");
}

SamplerConfig sampler_preset(std::string_view name) {
  if (name == "ode") return SamplerConfig::ode_default(2);
  if (name == "af3") return SamplerConfig::af3_default(200);
  throw ValidationError("unknown sampler preset '" + std::string(name) + "' (ode, af3)");
}

// Harness sampler defaults: centering only, since the toy network is not rotation equivariant.
SamplerConfig harness_sampler(std::string_view preset) {
  SamplerConfig s = sampler_preset(preset);
  s.augmentation = AugmentationConfig{false, 0.0};
  return s;
}

json sampler_json(const std::string& preset, const SamplerConfig& s) {
  json j;
  j["preset"] = preset;
  j["mode"] = std::string(to_string(s.mode));
  j["n_steps"] = s.n_steps;
  j["eta"] = s.eta;
  j["gamma0"] = s.churn.gamma0;
  j["gamma_min"] = s.churn.gamma_min;
  j["noise_scale"] = s.churn.noise_scale;
  j["init_std"] = s.init_std ? json(*s.init_std) : json(nullptr);
  j["augment"] = s.augment;
  j["rotate"] = s.augmentation.rotate;
  j["translation_std"] = s.augmentation.translation_std;
  return j;
}

json to_json_tree(const ExperimentConfig& c) {
  json j;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["workers"] = c.workers;

  json d;
  d["kind"] = std::string(to_string(c.data.kind));
  d["chains"] = c.data.chains;
  json ents = json::array();
  for (auto e : c.data.chain_entities) ents.push_back(std::string(to_string(e)));
  d["chain_entities"] = ents;
  d["bond_length"] = c.data.bond_length;
  d["jitter"] = c.data.jitter;
  json mix = json::array();
  for (const auto& g : c.data.mixture.components) {
    mix.push_back({{"weight", g.weight}, {"mean", {g.mean(0), g.mean(1), g.mean(2)}}, {"std", g.std}});
  }
  d["mixture"] = mix;
  d["seed"] = c.data_seed;
  j["data"] = d;

  const NetSpec& n = c.denoiser.net;
  json dn;
  dn["backend"] = c.denoiser.backend;
  dn["param"] = std::string(to_string(n.param));
  dn["n_blocks"] = n.n_blocks;
  dn["hidden"] = n.hidden;
  dn["time_embed"] = n.time_embed;
  dn["init_std"] = n.init_std;
  dn["sigma_data"] = n.noise.sigma_data;
  dn["sigma_max"] = n.noise.sigma_max;
  dn["sigma_min"] = n.noise.sigma_min;
  dn["rho"] = n.noise.rho;
  dn["checkpoint"] = c.denoiser.checkpoint;
  dn["pathway"] = std::string(to_string(c.denoiser.pathway));
  j["denoiser"] = dn;

  j["sampler"] = sampler_json(c.sampler_preset, c.sampler);

  const TrainConfig& t = c.train;
  json tr;
  tr["framework"] = std::string(to_string(t.framework));
  tr["batch"] = t.batch;
  tr["iterations"] = t.iterations;
  tr["lr"] = t.lr;
  tr["time_dist"] = {{"kind", t.time_dist.kind == TimeDistKind::beta ? "beta" : "uniform"},
                     {"alpha", t.time_dist.alpha},
                     {"beta", t.time_dist.beta}};
  json loss;
  loss["w_mse"] = t.loss.w_mse;
  loss["w_bond"] = t.loss.w_bond;
  loss["w_slddt"] = t.loss.w_slddt;
  json ew;
  for (int e = 0; e < 4; ++e) ew[kEntityNames[e]] = t.loss.entity_weight[static_cast<std::size_t>(e)];
  loss["entity_weight"] = ew;
  loss["pair_cutoff"] = t.loss.pair_rule.cutoff;
  json pm = json::array();
  for (const auto& row : t.loss.pair_rule.multiplier) pm.push_back(row);
  loss["pair_multiplier"] = pm;
  loss["align_mse"] = t.loss.align_mse;
  tr["loss"] = loss;
  tr["pathway_mix"] = t.pathway_mix;
  tr["seed"] = t.seed;
  tr["eval_every"] = t.eval_every;
  tr["eval"] = {{"n_samples", t.eval.n_samples},
                {"n_steps", t.eval.n_steps},
                {"pathway", std::string(to_string(t.eval.pathway))},
                {"seed", t.eval.seed}};
  tr["normalize_loss"] = t.normalize_loss;
  tr["optimizer"] = std::string(to_string(t.optimizer));
  tr["adam_beta1"] = t.adam_beta1;
  tr["adam_beta2"] = t.adam_beta2;
  tr["adam_eps"] = t.adam_eps;
  j["train"] = tr;

  json m;
  m["inclusion_radius"] = c.metrics.lddt.inclusion_radius;
  m["thresholds"] = c.metrics.lddt.thresholds;
  m["success_threshold"] = c.metrics.success_threshold;
  m["clash_distance"] = c.metrics.clash.min_distance;
  m["clash_mode"] = std::string(clash_mode_name(c.metrics.clash.mode));
  j["metrics"] = m;

  json sw;
  sw["eta"] = c.sweep.eta;
  sw["steps"] = c.sweep.steps;
  json modes = json::array();
  for (auto md : c.sweep.modes) modes.push_back(std::string(to_string(md)));
  sw["modes"] = modes;
  sw["n_seeds"] = c.sweep.n_seeds;
  sw["n_samples"] = c.sweep.n_samples;
  j["sweep"] = sw;

  j["prune"] = {{"k", c.prune.k}, {"finetune_iterations", c.prune.finetune_iterations}};
  return j;
}

int line_at(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the last key in path, found by scanning for each key in turn.
int line_of(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    const std::size_t p = text.find("\"" + key + "\"", pos);
    if (p == std::string::npos) return pos == 0 ? 0 : line_at(text, pos);
    pos = p;
  }
  return path.empty() ? 0 : line_at(text, pos);
}

std::string join(const std::vector<std::string>& path) {
  std::string s;
  for (const auto& k : path) s += (s.empty() ? "" : ".") + k;
  return s;
}

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    throw ConfigError(join(path) + ": " + msg, line_of(text_, path));
  }

  // Rejects keys absent from the defaults, recursing into objects.
  void check_keys(const json& user, const json& dflt, std::vector<std::string> path) const {
    if (!user.is_object()) fail(path, "expected an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
      path.push_back(it.key());
      if (!dflt.contains(it.key())) fail(path, "unknown key");
      const json& d = dflt.at(it.key());
      if (d.is_object()) check_keys(it.value(), d, path);
      path.pop_back();
    }
  }

  template <class T>
  T get(const json& j, const std::vector<std::string>& path) const {
    const json* node = &j;
    for (const auto& k : path) node = &node->at(k);
    try {
      return node->get<T>();
    } catch (const json::exception&) {
      fail(path, "wrong type (" + std::string(node->type_name()) + ")");
    }
  }

  // Runs fn, turning ValidationError into ConfigError anchored at path.
  template <class F>
  void guard(const std::vector<std::string>& path, F&& fn) const {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const ValidationError& e) {
      fail(path, e.what());
    }
  }

 private:
  const std::string& text_;
};

void merge_into(json& base, const json& user) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object()) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

ExperimentConfig from_json_tree(const json& j, const Reader& r) {
  ExperimentConfig c;
  using P = std::vector<std::string>;
  c.output_dir = r.get<std::string>(j, {"output_dir"});
  c.seed = r.get<std::uint64_t>(j, {"seed"});
  c.workers = r.get<int>(j, {"workers"});
  if (c.workers < 1) r.fail({"workers"}, "must be >= 1");

  r.guard({"data"}, [&] {
    r.guard({"data", "kind"}, [&] { c.data.kind = parse_toy_kind(r.get<std::string>(j, {"data", "kind"})); });
    c.data.chains = r.get<std::vector<int>>(j, {"data", "chains"});
    c.data.chain_entities.clear();
    for (const auto& s : r.get<std::vector<std::string>>(j, {"data", "chain_entities"})) {
      auto e = parse_entity(s);
      if (!e) r.fail({"data", "chain_entities"}, "unknown entity '" + s + "'");
      c.data.chain_entities.push_back(*e);
    }
    c.data.bond_length = r.get<double>(j, {"data", "bond_length"});
    c.data.jitter = r.get<double>(j, {"data", "jitter"});
    c.data.mixture.components.clear();
    const json& mix = j.at("data").at("mixture");
    if (!mix.is_array()) r.fail({"data", "mixture"}, "expected an array");
    for (const auto& g : mix) {
      if (!g.is_object()) r.fail({"data", "mixture"}, "expected objects {weight, mean, std}");
      for (auto it = g.begin(); it != g.end(); ++it) {
        if (it.key() != "weight" && it.key() != "mean" && it.key() != "std") {
          r.fail({"data", "mixture", it.key()}, "unknown key");
        }
      }
      GmmComponent comp;
      comp.weight = r.get<double>(g, {"weight"});
      comp.std = r.get<double>(g, {"std"});
      const auto mean = r.get<std::vector<double>>(g, {"mean"});
      if (mean.size() != 3) r.fail({"data", "mixture", "mean"}, "expected 3 numbers");
      comp.mean = Vec3(mean[0], mean[1], mean[2]);
      c.data.mixture.components.push_back(comp);
    }
    c.data_seed = r.get<std::uint64_t>(j, {"data", "seed"});
    c.data.validate();
  });

  r.guard({"denoiser"}, [&] {
    const P d{"denoiser"};
    auto key = [&](const char* k) { return P{"denoiser", k}; };
    c.denoiser.backend = r.get<std::string>(j, key("backend"));
    if (c.denoiser.backend != "net" && c.denoiser.backend != "gmm") {
      r.fail(key("backend"), "expected net or gmm");
    }
    NetSpec& n = c.denoiser.net;
    r.guard(key("param"), [&] { n.param = parse_parameterization(r.get<std::string>(j, key("param"))); });
    n.n_blocks = r.get<int>(j, key("n_blocks"));
    n.hidden = r.get<int>(j, key("hidden"));
    n.time_embed = r.get<int>(j, key("time_embed"));
    n.init_std = r.get<double>(j, key("init_std"));
    n.noise.sigma_data = r.get<double>(j, key("sigma_data"));
    n.noise.sigma_max = r.get<double>(j, key("sigma_max"));
    n.noise.sigma_min = r.get<double>(j, key("sigma_min"));
    n.noise.rho = r.get<double>(j, key("rho"));
    c.denoiser.checkpoint = r.get<std::string>(j, key("checkpoint"));
    r.guard(key("pathway"), [&] { c.denoiser.pathway = parse_pathway(r.get<std::string>(j, key("pathway"))); });
    n.validate();
  });

  r.guard({"sampler"}, [&] {
    auto key = [&](const char* k) { return P{"sampler", k}; };
    c.sampler_preset = r.get<std::string>(j, key("preset"));
    r.guard(key("preset"), [&] { c.sampler = harness_sampler(c.sampler_preset); });
    SamplerConfig& s = c.sampler;
    r.guard(key("mode"), [&] { s.mode = parse_sampler_mode(r.get<std::string>(j, key("mode"))); });
    s.n_steps = r.get<int>(j, key("n_steps"));
    const json& eta = j.at("sampler").at("eta");
    s.eta = eta.is_number() ? std::vector<double>{r.get<double>(j, key("eta"))}
                            : r.get<std::vector<double>>(j, key("eta"));
    s.churn.gamma0 = r.get<double>(j, key("gamma0"));
    s.churn.gamma_min = r.get<double>(j, key("gamma_min"));
    s.churn.noise_scale = r.get<double>(j, key("noise_scale"));
    const json& is = j.at("sampler").at("init_std");
    s.init_std = is.is_null() ? std::nullopt : std::optional<double>(r.get<double>(j, key("init_std")));
    s.augment = r.get<bool>(j, key("augment"));
    s.augmentation.rotate = r.get<bool>(j, key("rotate"));
    s.augmentation.translation_std = r.get<double>(j, key("translation_std"));
    s.validate();
  });

  r.guard({"train"}, [&] {
    auto key = [&](std::initializer_list<const char*> ks) {
      P p{"train"};
      for (auto k : ks) p.emplace_back(k);
      return p;
    };
    TrainConfig& t = c.train;
    r.guard(key({"framework"}),
            [&] { t.framework = parse_framework(r.get<std::string>(j, key({"framework"}))); });
    t.batch = r.get<int>(j, key({"batch"}));
    t.iterations = r.get<int>(j, key({"iterations"}));
    t.lr = r.get<double>(j, key({"lr"}));
    const auto kind = r.get<std::string>(j, key({"time_dist", "kind"}));
    if (kind != "beta" && kind != "uniform") r.fail(key({"time_dist", "kind"}), "expected beta or uniform");
    t.time_dist.kind = kind == "beta" ? TimeDistKind::beta : TimeDistKind::uniform;
    t.time_dist.alpha = r.get<double>(j, key({"time_dist", "alpha"}));
    t.time_dist.beta = r.get<double>(j, key({"time_dist", "beta"}));
    t.loss.w_mse = r.get<double>(j, key({"loss", "w_mse"}));
    t.loss.w_bond = r.get<double>(j, key({"loss", "w_bond"}));
    t.loss.w_slddt = r.get<double>(j, key({"loss", "w_slddt"}));
    for (int e = 0; e < 4; ++e) {
      t.loss.entity_weight[static_cast<std::size_t>(e)] =
          r.get<double>(j, key({"loss", "entity_weight", kEntityNames[e]}));
    }
    t.loss.pair_rule.cutoff = r.get<double>(j, key({"loss", "pair_cutoff"}));
    const auto pm = r.get<std::vector<std::vector<double>>>(j, key({"loss", "pair_multiplier"}));
    if (pm.size() != 4) r.fail(key({"loss", "pair_multiplier"}), "expected a 4x4 matrix");
    for (std::size_t a = 0; a < 4; ++a) {
      if (pm[a].size() != 4) r.fail(key({"loss", "pair_multiplier"}), "expected a 4x4 matrix");
      for (std::size_t b = 0; b < 4; ++b) t.loss.pair_rule.multiplier[a][b] = pm[a][b];
    }
    t.loss.align_mse = r.get<bool>(j, key({"loss", "align_mse"}));
    t.pathway_mix = r.get<double>(j, key({"pathway_mix"}));
    t.seed = r.get<std::uint64_t>(j, key({"seed"}));
    t.eval_every = r.get<int>(j, key({"eval_every"}));
    t.eval.n_samples = r.get<int>(j, key({"eval", "n_samples"}));
    t.eval.n_steps = r.get<int>(j, key({"eval", "n_steps"}));
    r.guard(key({"eval", "pathway"}),
            [&] { t.eval.pathway = parse_pathway(r.get<std::string>(j, key({"eval", "pathway"}))); });
    t.eval.seed = r.get<std::uint64_t>(j, key({"eval", "seed"}));
    t.normalize_loss = r.get<bool>(j, key({"normalize_loss"}));
    r.guard(key({"optimizer"}),
            [&] { t.optimizer = parse_optimizer(r.get<std::string>(j, key({"optimizer"}))); });
    t.adam_beta1 = r.get<double>(j, key({"adam_beta1"}));
    t.adam_beta2 = r.get<double>(j, key({"adam_beta2"}));
    t.adam_eps = r.get<double>(j, key({"adam_eps"}));
    t.validate();
  });

  r.guard({"metrics"}, [&] {
    auto key = [&](const char* k) { return P{"metrics", k}; };
    c.metrics.lddt.inclusion_radius = r.get<double>(j, key("inclusion_radius"));
    c.metrics.lddt.thresholds = r.get<std::vector<double>>(j, key("thresholds"));
    c.metrics.success_threshold = r.get<double>(j, key("success_threshold"));
    c.metrics.clash.min_distance = r.get<double>(j, key("clash_distance"));
    r.guard(key("clash_mode"),
            [&] { c.metrics.clash.mode = parse_clash_mode(r.get<std::string>(j, key("clash_mode"))); });
    if (!(c.metrics.lddt.inclusion_radius > 0.0)) r.fail(key("inclusion_radius"), "must be positive");
    if (c.metrics.lddt.thresholds.empty()) r.fail(key("thresholds"), "must be non-empty");
    if (!(c.metrics.success_threshold > 0.0)) r.fail(key("success_threshold"), "must be positive");
    if (!(c.metrics.clash.min_distance > 0.0)) r.fail(key("clash_distance"), "must be positive");
  });

  {
    auto key = [&](const char* k) { return P{"sweep", k}; };
    c.sweep.eta = r.get<std::vector<double>>(j, key("eta"));
    c.sweep.steps = r.get<std::vector<int>>(j, key("steps"));
    c.sweep.modes.clear();
    for (const auto& m : r.get<std::vector<std::string>>(j, key("modes"))) {
      r.guard(key("modes"), [&] { c.sweep.modes.push_back(parse_sampler_mode(m)); });
    }
    c.sweep.n_seeds = r.get<int>(j, key("n_seeds"));
    c.sweep.n_samples = r.get<int>(j, key("n_samples"));
    if (c.sweep.eta.empty()) r.fail(key("eta"), "must be non-empty");
    if (c.sweep.steps.empty()) r.fail(key("steps"), "must be non-empty");
    if (c.sweep.modes.empty()) r.fail(key("modes"), "must be non-empty");
    for (double e : c.sweep.eta) {
      if (!(e > 0.0)) r.fail(key("eta"), "entries must be positive");
    }
    for (int s : c.sweep.steps) {
      if (s < 1) r.fail(key("steps"), "entries must be >= 1");
    }
    if (c.sweep.n_seeds < 1) r.fail(key("n_seeds"), "must be >= 1");
    if (c.sweep.n_samples < 1) r.fail(key("n_samples"), "must be >= 1");
  }

  c.prune.k = r.get<std::vector<int>>(j, {"prune", "k"});
  c.prune.finetune_iterations = r.get<int>(j, {"prune", "finetune_iterations"});
  if (c.prune.k.empty()) r.fail({"prune", "k"}, "must be non-empty");
  for (int k : c.prune.k) {
    if (k < 0 || k >= c.denoiser.net.n_blocks) r.fail({"prune", "k"}, "entries must be in [0, n_blocks)");
  }
  if (c.prune.finetune_iterations < 0) r.fail({"prune", "finetune_iterations"}, "must be >= 0");

  if (parameterization_for(c.train.framework) != c.denoiser.net.param) {
    r.fail({"train", "framework"}, std::string(to_string(c.train.framework)) + " training needs denoiser.param " +
                                       std::string(to_string(parameterization_for(c.train.framework))));
  }
  if (c.denoiser.backend == "gmm" && c.data.kind != ToyKind::gmm) {
    r.fail({"denoiser", "backend"}, "the gmm backend needs data.kind gmm");
  }
  return c;
}

}  // namespace

ConfigError::ConfigError(const std::string& msg, int line)
    : ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}

ExperimentConfig::ExperimentConfig() {
  data.kind = ToyKind::complex_with_ligand;
  data.chains = {12, 4};
  data.jitter = 0.5;
  train.batch = 8;
  train.iterations = 6000;
  train.lr = 1e-2;
  train.normalize_loss = true;
  sampler = harness_sampler(sampler_preset);
}

void ExperimentConfig::validate() const {
  if (workers < 1) throw ValidationError("workers must be >= 1");
  data.validate();
  denoiser.net.validate();
  sampler.validate();
  train.validate();
}

ExperimentConfig parse_config(const std::string& text) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = line_at(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(std::string("invalid JSON: ") + e.what(), line);
  }
  const Reader r(text);
  ExperimentConfig base;
  if (user.is_object() && user.contains("sampler") && user["sampler"].is_object() &&
      user["sampler"].contains("preset")) {
    const std::string preset = r.get<std::string>(user, {"sampler", "preset"});
    r.guard({"sampler", "preset"}, [&] { base.sampler = harness_sampler(preset); });
    base.sampler_preset = preset;
  }
  json tree = to_json_tree(base);
  r.check_keys(user, tree, {});
  merge_into(tree, user);
  return from_json_tree(tree, r);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path + "'", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) { return to_json_tree(c).dump(2) + "\n"; }

NetSpec resolve_net_spec(const ExperimentConfig& c, const Structure& reference) {
  NetSpec n = c.denoiser.net;
  n.cond_dim = condition_width(reference.size());
  return n;
}

SamplerConfig resolve_sampler(const ExperimentConfig& c, SamplerConfig base) {
  base.noise = c.denoiser.net.noise;
  if (!base.init_std) {
    base.init_std = c.denoiser.net.param == Parameterization::v_pred ? c.denoiser.net.init_std
                                                                     : c.denoiser.net.noise.sigma_max;
  }
  return base;
}

}  // namespace fewstep
