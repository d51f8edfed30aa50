#pragma once

#include <map>
#include <numbers>
#include <sstream>

#include "bifkit/model.hpp"

namespace bifkit {

// ---------------------------------------------------------------------------
// Built-in models with closed-form ground truth.  All four keep the
// unperturbed dynamics linear (f = 0) so the candidate family is exact; the
// interesting behavior lives in the rough perturbation g.  User-defined
// models enter through the library API instead.

struct ModelBundle {
  EvolutionProblem problem;
  FamilyChart chart;
  std::map<std::string, double> params; // resolved values, defaults applied
};

struct RegistryEntry {
  std::string name;
  std::string summary;
  std::map<std::string, double> defaults;
};

inline const std::vector<RegistryEntry>& registry_list() {
  static const std::vector<RegistryEntry> entries = {
      {"harmonic_forced",
       "x'' + x = eps(-x' + lambda cos t); planar, k = n = 2, family S(h) = h; "
       "x(t) = lambda sin t survives for every eps",
       {{"lambda", 1.0}, {"period", 2.0 * std::numbers::pi}}},
      {"center_contraction",
       "planar center + z' = -gamma z; k = 2 family (h1, h2, 0); forcing "
       "g = (gx_cos cos t + gx_sin sin t, gy_cos cos t + gy_sin sin t, gz), "
       "constant in the state",
       {{"gamma", 1.0},
        {"gx_cos", 0.0},
        {"gx_sin", 0.0},
        {"gy_cos", 0.0},
        {"gy_sin", 0.0},
        {"gz", 1.0}}},
      {"forced_vdp",
       "x'' + x = eps((1 - x^2) x' + lambda cos t); van der Pol at resonance, "
       "k = n = 2",
       {{"lambda", 1.0}}},
      {"galerkin_heat_osc",
       "planar center + N heat modes z_j' = -j^2 z_j (stiff diagonal tail); "
       "planar forcing (0, -x2 + lambda cos t), mode forcing "
       "kappa/j^2 (1 - x1) cos t",
       {{"N", 8.0}, {"lambda", 1.0}, {"kappa", 1.0}}},
  };
  return entries;
}

namespace detail {

inline std::map<std::string, double>
resolve_params(const RegistryEntry& entry,
               const std::map<std::string, double>& overrides) {
  std::map<std::string, double> params = entry.defaults;
  for (const auto& [key, value] : overrides) {
    auto it = params.find(key);
    if (it == params.end()) {
      std::ostringstream msg;
      msg << "model '" << entry.name << "' has no parameter '" << key
          << "'; valid parameters:";
      for (const auto& [k, v] : entry.defaults) msg << " " << k;
      throw ConfigError(msg.str());
    }
    it->second = value;
  }
  return params;
}

inline FamilyChart planar_identity_chart(double r0) {
  FamilyChart chart;
  chart.k = 2;
  chart.h0 = Vec::Zero(2);
  chart.r0 = r0;
  chart.S = [](const Vec& h) { return h; };
  chart.S_prime = [](const Vec&) { return Mat::Identity(2, 2); };
  return chart;
}

// Family (h1, h2, 0, ..., 0) in an n-dimensional state space.
inline FamilyChart planar_embedding_chart(Index n, double r0) {
  FamilyChart chart;
  chart.k = 2;
  chart.h0 = Vec::Zero(2);
  chart.r0 = r0;
  chart.S = [n](const Vec& h) {
    Vec x = Vec::Zero(n);
    x.head(2) = h;
    return x;
  };
  chart.S_prime = [n](const Vec&) {
    Mat J = Mat::Zero(n, 2);
    J(0, 0) = 1.0;
    J(1, 1) = 1.0;
    return J;
  };
  return chart;
}

} // namespace detail

inline ModelBundle registry_get(const std::string& name,
                                const std::map<std::string, double>& overrides = {}) {
  const RegistryEntry* entry = nullptr;
  for (const auto& e : registry_list())
    if (e.name == name) entry = &e;
  if (!entry) {
    std::ostringstream msg;
    msg << "unknown model '" << name << "'; available:";
    for (const auto& e : registry_list()) msg << " " << e.name;
    throw ConfigError(msg.str());
  }
  const auto params = detail::resolve_params(*entry, overrides);

  ModelBundle out;
  out.params = params;
  EvolutionProblem& p = out.problem;
  p.name = name;
  p.period = 2.0 * std::numbers::pi;

  if (name == "harmonic_forced") {
    const double lam = params.at("lambda");
    // Overriding the period away from a full turn is the intended way to
    // demonstrate a family that is not made of fixed points.
    p.period = params.at("period");
    p.n = 2;
    p.spectral = {SpectralBlock::rotation(1.0)};
    p.A = spectral_matrix(p.spectral);
    p.g = [lam](double t, const Vec& x, double) {
      return Vec{{0.0, -x[1] + lam * std::cos(t)}};
    };
    out.chart = detail::planar_identity_chart(2.0);
  } else if (name == "forced_vdp") {
    const double lam = params.at("lambda");
    p.n = 2;
    p.spectral = {SpectralBlock::rotation(1.0)};
    p.A = spectral_matrix(p.spectral);
    p.g = [lam](double t, const Vec& x, double) {
      return Vec{{0.0, (1.0 - x[0] * x[0]) * x[1] + lam * std::cos(t)}};
    };
    out.chart = detail::planar_identity_chart(3.0);
  } else if (name == "center_contraction") {
    const double gamma = params.at("gamma");
    if (gamma <= 0.0)
      throw ConfigError("center_contraction requires gamma > 0");
    const double axc = params.at("gx_cos"), axs = params.at("gx_sin");
    const double ayc = params.at("gy_cos"), ays = params.at("gy_sin");
    const double az = params.at("gz");
    p.n = 3;
    p.spectral = {SpectralBlock::rotation(1.0), SpectralBlock::scalar(-gamma)};
    p.A = spectral_matrix(p.spectral);
    p.g = [=](double t, const Vec&, double) {
      return Vec{{axc * std::cos(t) + axs * std::sin(t),
                  ayc * std::cos(t) + ays * std::sin(t), az}};
    };
    out.chart = detail::planar_embedding_chart(3, 1.5);
  } else { // galerkin_heat_osc
    const double Nd = params.at("N");
    const auto N = static_cast<Index>(Nd);
    if (Nd != static_cast<double>(N) || N < 1 || N > 64)
      throw ConfigError("galerkin_heat_osc requires integer N in [1, 64]");
    const double lam = params.at("lambda");
    const double kappa = params.at("kappa");
    p.n = 2 + N;
    p.spectral = {SpectralBlock::rotation(1.0)};
    for (Index j = 1; j <= N; ++j)
      p.spectral.push_back(SpectralBlock::scalar(-double(j) * double(j)));
    p.A = spectral_matrix(p.spectral);
    p.semigroup = SemigroupClass::AnalyticCompact;
    const Index n = p.n;
    p.g = [lam, kappa, n](double t, const Vec& x, double) {
      Vec out = Vec::Zero(n);
      out[1] = -x[1] + lam * std::cos(t);
      const double drive = (1.0 - x[0]) * std::cos(t);
      for (Index j = 1; j + 2 <= n; ++j)
        out[j + 1] = kappa / (double(j) * double(j)) * drive;
      return out;
    };
    out.chart = detail::planar_embedding_chart(p.n, 2.0);
  }
  return out;
}

} // namespace bifkit
