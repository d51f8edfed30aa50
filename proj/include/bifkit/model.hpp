#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "bifkit/types.hpp"

namespace bifkit {

// ---------------------------------------------------------------------------
// Problem statement:  x' = A x + f(t, x) + eps * g(t, x, eps),  T-periodic in t.
//
// f is the smooth part (C^1 in x, Jacobian available or synthesized by finite
// differences); g is the rough part, assumed Lipschitz in x only.  Callbacks
// must be pure and reentrant: evaluations may happen concurrently.

using VecField = std::function<Vec(double, const Vec&)>;
using JacField = std::function<Mat(double, const Vec&)>;
using PerturbField = std::function<Vec(double, const Vec&, double)>;

enum class SemigroupClass {
  AnalyticCompact, // analytic semigroup with compact resolvent
  ContractiveC0,   // contraction semigroup, optional decay rate
};

struct EvolutionProblem {
  Index n = 0;
  double period = 0.0;

  Mat A; // n x n drift
  // Optional block structure of A.  Non-empty enables the exponential
  // integrator path; must agree with A (validated).
  std::vector<SpectralBlock> spectral;

  VecField f;     // may be empty -> treated as zero
  JacField f_x;   // may be empty -> synthesized by central differences
  PerturbField g; // may be empty -> treated as zero

  SemigroupClass semigroup = SemigroupClass::ContractiveC0;
  std::optional<double> decay_rate; // gamma with mu(A) <= -gamma

  std::string name = "anonymous";
};

// k-parameter family of candidate initial conditions, defined on the closed
// ball B(h0, r0) in R^k.
struct FamilyChart {
  Index k = 0;
  Vec h0;
  double r0 = 1.0;
  std::function<Vec(const Vec&)> S;       // R^k -> R^n
  std::function<Mat(const Vec&)> S_prime; // may be empty -> finite differences
};

// ---------------------------------------------------------------------------
// Finite-difference fallbacks.  Central differences, step sqrt(machine eps)
// scaled by the point magnitude.

inline double fd_step(double scale) {
  return 1.4901161193847656e-08 * std::max(1.0, scale);
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& F, const Vec& x) {
  const double d = fd_step(x.norm());
  Vec xp = x, xm = x;
  Mat J;
  for (Index j = 0; j < x.size(); ++j) {
    xp[j] += d;
    xm[j] -= d;
    const Vec fp = F(xp);
    const Vec fm = F(xm);
    if (J.size() == 0) J.resize(fp.size(), x.size());
    J.col(j) = (fp - fm) / (2.0 * d);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return J;
}

// Jacobian of f(t, .) at x: analytic callback if present, else differences.
inline Mat problem_f_jacobian(const EvolutionProblem& p, double t, const Vec& x) {
  if (!p.f) return Mat::Zero(p.n, p.n);
  if (p.f_x) return p.f_x(t, x);
  return fd_jacobian([&](const Vec& y) { return p.f(t, y); }, x);
}

inline Vec problem_f(const EvolutionProblem& p, double t, const Vec& x) {
  return p.f ? p.f(t, x) : Vec(Vec::Zero(p.n));
}

inline Vec problem_g(const EvolutionProblem& p, double t, const Vec& x, double eps) {
  return p.g ? p.g(t, x, eps) : Vec(Vec::Zero(p.n));
}

inline Mat chart_jacobian(const FamilyChart& chart, const Vec& h) {
  if (chart.S_prime) return chart.S_prime(h);
  return fd_jacobian(chart.S, h);
}

// Basic shape checks used by entry points; throws ConfigError on mismatch.
inline void check_shapes(const EvolutionProblem& p) {
  if (p.n <= 0) throw ConfigError("problem dimension must be positive");
  if (p.period <= 0.0) throw ConfigError("problem period must be positive");
  if (p.A.rows() != p.n || p.A.cols() != p.n)
    throw ConfigError("drift matrix shape does not match problem dimension");
  if (!p.spectral.empty() && spectral_dimension(p.spectral) != p.n)
    throw ConfigError("spectral block list does not cover the state space");
}

inline void check_shapes(const EvolutionProblem& p, const FamilyChart& chart) {
  check_shapes(p);
  if (chart.k <= 0 || chart.k > p.n)
    throw ConfigError("family dimension k must satisfy 1 <= k <= n");
  if (chart.h0.size() != chart.k)
    throw ConfigError("chart center dimension does not match k");
  if (chart.r0 <= 0.0) throw ConfigError("chart radius must be positive");
  if (!chart.S) throw ConfigError("family chart must define S");
}

} // namespace bifkit
