#include "fewstep/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fewstep {

std::string_view to_string(Parameterization p) { return p == Parameterization::x_pred ? "x-pred" : "v-pred"; }

Parameterization parse_parameterization(std::string_view s) {
  if (s == "x-pred") return Parameterization::x_pred;
  if (s == "v-pred") return Parameterization::v_pred;
  throw ValidationError("unknown parameterization '" + std::string(s) + "'");
}

std::string_view to_string(Pathway p) {
  switch (p) {
    case Pathway::none: return "none";
    case Pathway::a: return "pathway-A";
    case Pathway::b: return "pathway-B";
  }
  return "none";
}

Pathway parse_pathway(std::string_view s) {
  if (s == "none") return Pathway::none;
  if (s == "pathway-A" || s == "a" || s == "A") return Pathway::a;
  if (s == "pathway-B" || s == "b" || s == "B") return Pathway::b;
  throw ValidationError("unknown pathway '" + std::string(s) + "'");
}

NoiseTime noise_time(double t, const NoiseLevelParams& p) { return {t, sigma_at(t, p)}; }

Coords Denoiser::denoise(const Coords& x, NoiseTime nt, const Condition& c) const {
  Coords out = predict(x, nt, c);
  if (parameterization() == Parameterization::v_pred) return v_to_x(out, x, nt.t);
  return out;
}

Coords v_to_x(const Coords& v, const Coords& x_t, double t) {
  if (v.rows() != x_t.rows()) throw ValidationError("v_to_x: shape mismatch");
  return x_t + (1.0 - t) * v;
}

Coords x_to_v(const Coords& x1_hat, const Coords& x_t, double t) {
  if (x1_hat.rows() != x_t.rows()) throw ValidationError("x_to_v: shape mismatch");
  if (!(t < 1.0)) throw DomainError("x_to_v: undefined at t = 1");
  return (x1_hat - x_t) / (1.0 - t);
}

EdmPrecond edm_precond(double sigma, double sigma_data) {
  EdmPrecond c;
  const double s2 = sigma * sigma;
  const double d2 = sigma_data * sigma_data;
  c.c_skip = d2 / (s2 + d2);
  c.c_out = sigma * sigma_data / std::sqrt(s2 + d2);
  c.c_in = 1.0 / std::sqrt(s2 + d2);
  c.c_noise = 0.25 * std::log(std::max(sigma, 1e-20));
  return c;
}

}  // namespace fewstep
