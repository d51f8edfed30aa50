#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bifkit/model.hpp"
#include "bifkit/types.hpp"

namespace bifkit {

// ---------------------------------------------------------------------------
// Embedded Runge-Kutta 5(4) pair (Dormand-Prince) with fourth-order dense
// output.  Two stage kernels share the controller: the plain kernel treats
// the full right-hand side explicitly; the exponential kernel propagates a
// block-structured linear part exactly and applies the tableau to the
// remaining nonlinearity, so a stiff diagonal drift does not force the step
// size down.

namespace dopri {

// Node coefficients
inline constexpr double c2 = 1.0 / 5.0;
inline constexpr double c3 = 3.0 / 10.0;
inline constexpr double c4 = 4.0 / 5.0;
inline constexpr double c5 = 8.0 / 9.0;
inline constexpr double c6 = 1.0;
inline constexpr double c7 = 1.0;

// Coupling coefficients
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                        a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                        a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                        a65 = -5103.0 / 18656.0;
// Fifth-order weights (also the seventh stage row; first-same-as-last)
inline constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0,
                        b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                        b6 = 11.0 / 84.0;
// Embedded error weights b5 - b4hat
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0,
                        e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                        e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense-output coefficients
inline constexpr double d1 = -12715105075.0 / 11282082432.0;
inline constexpr double d3 = 87487479700.0 / 32700410799.0;
inline constexpr double d4 = -10690763975.0 / 1880347072.0;
inline constexpr double d5 = 701980252875.0 / 199316789632.0;
inline constexpr double d6 = -1453857185.0 / 822651844.0;
inline constexpr double d7 = 69997945.0 / 29380423.0;

} // namespace dopri

struct IntegratorOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  // Divergence guard: integration aborts once |x| > blowup_factor * (1 + |xi|).
  double blowup_factor = 1e6;
  std::size_t max_steps = 2'000'000;
  double initial_step = 0.0; // 0 -> automatic selection
  // Ignore spectral structure and run the plain kernel (testing aid).
  bool force_dense = false;
};

struct IntegratorStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
  bool exponential_path = false;
  double abs_tol = 0.0;
  double rel_tol = 0.0;
};

// One accepted step's interpolation data.
struct DenseSegment {
  double t0 = 0.0;
  double h = 0.0;
  bool hermite = false;
  // Plain kernel: five dense-output coefficient vectors.
  // Exponential kernel: {y0, y1, f0, f1} for cubic Hermite.
  std::vector<Vec> c;

  Vec eval(double theta) const {
    if (!hermite) {
      return c[0] +
             theta * (c[1] + (1.0 - theta) *
                                 (c[2] + theta * (c[3] + (1.0 - theta) * c[4])));
    }
    const double t2 = theta * theta, t3 = t2 * theta;
    return (2 * t3 - 3 * t2 + 1) * c[0] + (-2 * t3 + 3 * t2) * c[1] +
           h * ((t3 - 2 * t2 + theta) * c[2] + (t3 - t2) * c[3]);
  }
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<DenseSegment> segments;
  Vec xi;
  double epsilon = 0.0;
  IntegratorStats stats;

  const Vec& terminal() const { return x.back(); }

  // Interpolated state anywhere inside the integration window.
  Vec sample(double s) const {
    if (segments.empty()) throw DomainError("trajectory holds no dense data");
    if (s < t.front() - 1e-12 || s > t.back() + 1e-12)
      throw DomainError("sample time outside the trajectory window");
    s = std::clamp(s, t.front(), t.back());
    // Last segment whose start is <= s.
    std::size_t lo = 0, hi = segments.size();
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (segments[mid].t0 <= s)
        lo = mid;
      else
        hi = mid;
    }
    const DenseSegment& seg = segments[lo];
    return seg.eval((s - seg.t0) / seg.h);
  }

  // State at a mesh time that was passed to integrate(); exact node lookup.
  const Vec& at_time(double s) const {
    const double tol = 1e-10 * std::max(1.0, std::abs(s));
    auto it = std::lower_bound(t.begin(), t.end(), s - tol);
    if (it == t.end() || std::abs(*it - s) > tol)
      throw DomainError("requested time is not a trajectory node");
    return x[static_cast<std::size_t>(it - t.begin())];
  }
};

// ---------------------------------------------------------------------------
// Internal system form handed to the stepper.

struct OdeSystem {
  Index dim = 0;
  // Full right-hand side (always available; plain kernel uses it).
  std::function<Vec(double, const Vec&)> rhs;
  // Block structure + remaining nonlinearity (exponential kernel).
  std::vector<SpectralBlock> spectral;
  std::function<Vec(double, const Vec&)> nonlinear;
};

// Action of the block-structured drift itself (not its exponential).
inline Vec apply_spectral_drift(const std::vector<SpectralBlock>& blocks,
                                const Vec& v) {
  Vec out(v.size());
  Index at = 0;
  for (const auto& b : blocks) {
    if (b.kind == SpectralBlock::Kind::Scalar) {
      out[at] = b.value * v[at];
      at += 1;
    } else {
      out[at] = b.value * v[at + 1];
      out[at + 1] = -b.value * v[at];
      at += 2;
    }
  }
  return out;
}

namespace detail {

inline double error_norm(const Vec& err, const Vec& y0, const Vec& y1,
                         double atol, double rtol) {
  double acc = 0.0;
  for (Index i = 0; i < err.size(); ++i) {
    const double sk = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sk;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

inline double rms_scaled(const Vec& v, const Vec& ref, double atol, double rtol) {
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double sk = atol + rtol * std::abs(ref[i]);
    const double q = v[i] / sk;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

// Classic starting-step heuristic over the effective (kernel-visible) field.
inline double initial_step(const std::function<Vec(double, const Vec&)>& field,
                           double t0, const Vec& y0, const Vec& f0, double span,
                           double atol, double rtol) {
  const double d0 = rms_scaled(y0, y0, atol, rtol);
  const double d1 = rms_scaled(f0, y0, atol, rtol);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * (d0 / d1);
  h0 = std::min(h0, span);
  const Vec y1 = y0 + h0 * f0;
  const Vec f1 = field(t0 + h0, y1);
  const double d2 = rms_scaled(f1 - f0, y0, atol, rtol) / h0;
  const double dm = std::max(d1, d2);
  double h1 = (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                            : std::pow(0.01 / dm, 0.2);
  return std::min({100.0 * h0, h1, span});
}

} // namespace detail

// Core stepper.  `mesh` lists interior times that must become exact nodes
// (sorted, within (0, t_end]); guard_ref scales the divergence bound.
inline Trajectory integrate_system(const OdeSystem& sys, const Vec& y0,
                                   double t_end, const IntegratorOptions& opts,
                                   std::span<const double> mesh = {},
                                   double guard_ref = -1.0) {
  using namespace dopri;
  if (t_end <= 0.0) throw DomainError("integration horizon must be positive");

  const bool expo = !opts.force_dense && !sys.spectral.empty();
  const auto& field = expo ? sys.nonlinear : sys.rhs;
  const double guard =
      opts.blowup_factor * (1.0 + (guard_ref >= 0.0 ? guard_ref : y0.norm()));

  Trajectory traj;
  traj.xi = y0;
  traj.stats.exponential_path = expo;
  traj.stats.abs_tol = opts.abs_tol;
  traj.stats.rel_tol = opts.rel_tol;
  traj.t.push_back(0.0);
  traj.x.push_back(y0);

  // exp(tau*A) v for the exponential kernel.
  const auto ev = [&sys](double tau, const Vec& v) {
    Vec out = v;
    apply_spectral_exp(sys.spectral, tau, out);
    return out;
  };

  double t = 0.0;
  Vec y = y0;
  Vec F1 = field(0.0, y); // first-same-as-last slot
  traj.stats.rhs_evaluations += 1;

  double h;
  if (opts.initial_step > 0.0) {
    h = std::min(opts.initial_step, t_end);
  } else {
    h = detail::initial_step(field, 0.0, y, F1, t_end, opts.abs_tol,
                             opts.rel_tol);
    traj.stats.rhs_evaluations += 1;
  }

  std::size_t mesh_at = 0;
  while (mesh_at < mesh.size() && mesh[mesh_at] <= 1e-14) ++mesh_at;

  bool just_rejected = false;
  const double t_tiny = 1e-12 * std::max(1.0, t_end);

  Vec k2, k3, k4, k5, k6, k7, ynew, errv;
  while (t < t_end - t_tiny) {
    if (traj.stats.accepted + traj.stats.rejected >= opts.max_steps)
      throw FlowError("step budget exhausted", t);

    h = std::min(h, t_end - t);
    double target = -1.0;
    if (mesh_at < mesh.size()) {
      const double gap = mesh[mesh_at] - t;
      if (gap <= h * (1.0 + 1e-12)) {
        h = gap;
        target = mesh[mesh_at];
      }
    } else if (h >= t_end - t - t_tiny) {
      target = t_end;
    }
    if (h >= t_end - t - t_tiny && target < 0.0) target = t_end;
    if (h < 1e-14 * std::max(1.0, std::abs(t)))
      throw FlowError("step size underflow", t);

    double errnorm;
    if (!expo) {
      const Vec& k1 = F1;
      ynew = y + h * (a21 * k1);
      k2 = sys.rhs(t + c2 * h, ynew);
      ynew = y + h * (a31 * k1 + a32 * k2);
      k3 = sys.rhs(t + c3 * h, ynew);
      ynew = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
      k4 = sys.rhs(t + c4 * h, ynew);
      ynew = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      k5 = sys.rhs(t + c5 * h, ynew);
      ynew = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      k6 = sys.rhs(t + c6 * h, ynew);
      ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = sys.rhs(t + h, ynew);
      traj.stats.rhs_evaluations += 6;
      errv = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      errnorm = detail::error_norm(errv, y, ynew, opts.abs_tol, opts.rel_tol);
      if (errnorm <= 1.0) {
        DenseSegment seg;
        seg.t0 = t;
        seg.h = h;
        const Vec ydiff = ynew - y;
        const Vec bspl = h * k1 - ydiff;
        seg.c = {y, ydiff, bspl, ydiff - h * k7 - bspl,
                 Vec(h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 +
                          d7 * k7))};
        traj.segments.push_back(std::move(seg));
      }
    } else {
      const Vec& f1v = F1;
      ynew = ev(c2 * h, y) + h * (a21 * ev((c2)*h, f1v));
      k2 = sys.nonlinear(t + c2 * h, ynew);
      ynew = ev(c3 * h, y) +
             h * (a31 * ev(c3 * h, f1v) + a32 * ev((c3 - c2) * h, k2));
      k3 = sys.nonlinear(t + c3 * h, ynew);
      ynew = ev(c4 * h, y) + h * (a41 * ev(c4 * h, f1v) +
                                  a42 * ev((c4 - c2) * h, k2) +
                                  a43 * ev((c4 - c3) * h, k3));
      k4 = sys.nonlinear(t + c4 * h, ynew);
      ynew = ev(c5 * h, y) +
             h * (a51 * ev(c5 * h, f1v) + a52 * ev((c5 - c2) * h, k2) +
                  a53 * ev((c5 - c3) * h, k3) + a54 * ev((c5 - c4) * h, k4));
      k5 = sys.nonlinear(t + c5 * h, ynew);
      ynew = ev(c6 * h, y) +
             h * (a61 * ev(c6 * h, f1v) + a62 * ev((c6 - c2) * h, k2) +
                  a63 * ev((c6 - c3) * h, k3) + a64 * ev((c6 - c4) * h, k4) +
                  a65 * ev((c6 - c5) * h, k5));
      k6 = sys.nonlinear(t + c6 * h, ynew);
      ynew = ev(h, y) + h * (b1 * ev(h, f1v) + b3 * ev((1.0 - c3) * h, k3) +
                             b4 * ev((1.0 - c4) * h, k4) +
                             b5 * ev((1.0 - c5) * h, k5) +
                             b6 * ev((1.0 - c6) * h, k6));
      k7 = sys.nonlinear(t + h, ynew);
      traj.stats.rhs_evaluations += 6;
      errv = h * (e1 * ev(h, f1v) + e3 * ev((1.0 - c3) * h, k3) +
                  e4 * ev((1.0 - c4) * h, k4) + e5 * ev((1.0 - c5) * h, k5) +
                  e6 * ev((1.0 - c6) * h, k6) + e7 * k7);
      errnorm = detail::error_norm(errv, y, ynew, opts.abs_tol, opts.rel_tol);
      if (errnorm <= 1.0) {
        DenseSegment seg;
        seg.t0 = t;
        seg.h = h;
        seg.hermite = true;
        seg.c = {y, ynew, Vec(apply_spectral_drift(sys.spectral, y) + f1v),
                 Vec(apply_spectral_drift(sys.spectral, ynew) + k7)};
        traj.segments.push_back(std::move(seg));
      }
    }

    const double safe = 0.9 * std::pow(std::max(errnorm, 1e-16), -0.2);
    if (errnorm <= 1.0) {
      t = (target >= 0.0) ? target : t + h;
      y = ynew;
      F1 = k7;
      traj.stats.accepted += 1;
      traj.t.push_back(t);
      traj.x.push_back(y);
      if (!y.allFinite() || y.norm() > guard)
        throw FlowError("solution norm exceeded the divergence bound", t);
      while (mesh_at < mesh.size() &&
             mesh[mesh_at] <= t + 1e-12 * std::max(1.0, std::abs(t)))
        ++mesh_at;
      h *= std::min(just_rejected ? 1.0 : 5.0, std::max(0.2, safe));
      just_rejected = false;
    } else {
      traj.stats.rejected += 1;
      h *= std::max(0.2, std::min(safe, 1.0));
      just_rejected = true;
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Problem-level entry points.

inline OdeSystem base_system(const EvolutionProblem& p, double eps) {
  OdeSystem sys;
  sys.dim = p.n;
  sys.rhs = [&p, eps](double t, const Vec& x) {
    Vec out = p.A * x;
    if (p.f) out += p.f(t, x);
    if (p.g && eps != 0.0) out += eps * p.g(t, x, eps);
    return out;
  };
  if (!p.spectral.empty()) {
    sys.spectral = p.spectral;
    sys.nonlinear = [&p, eps](double t, const Vec& x) {
      Vec out = Vec::Zero(p.n);
      if (p.f) out += p.f(t, x);
      if (p.g && eps != 0.0) out += eps * p.g(t, x, eps);
      return out;
    };
  }
  return sys;
}

inline Trajectory integrate(const EvolutionProblem& p, const Vec& xi,
                            double eps, double t_end,
                            const IntegratorOptions& opts = {},
                            std::span<const double> mesh = {}) {
  check_shapes(p);
  if (xi.size() != p.n) throw ConfigError("initial state dimension mismatch");
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    if (mesh[i] < 0.0 || mesh[i] > t_end + 1e-12 * std::max(1.0, t_end))
      throw DomainError("mesh time outside the integration window");
    if (i > 0 && mesh[i] <= mesh[i - 1])
      throw DomainError("mesh times must be strictly increasing");
  }
  Trajectory traj = integrate_system(base_system(p, eps), xi, t_end, opts, mesh);
  traj.epsilon = eps;
  return traj;
}

// Time-T map of the perturbed system.
inline Vec poincare(const EvolutionProblem& p, const Vec& xi, double eps,
                    const IntegratorOptions& opts = {}) {
  return integrate(p, xi, eps, p.period, opts).terminal();
}

// P_eps(xi) - xi; zeros are initial conditions of T-periodic solutions.
inline Vec displacement(const EvolutionProblem& p, const Vec& xi, double eps,
                        const IntegratorOptions& opts = {}) {
  return poincare(p, xi, eps, opts) - xi;
}

// ---------------------------------------------------------------------------
// Variational data along the unperturbed flow.  One augmented integration of
// dimension n + n^2 + n carries the orbit, the matrix variational equation
//   Y' = (A + f_x(t, x)) Y,  Y(0) = I,
// and the inhomogeneous response problem
//   q' = (A + f_x(t, x)) q + g(t, x, 0),  q(0) = 0,
// under a single step-size control.

struct MonodromyData {
  Vec base_point;
  Mat monodromy; // Y(T) = P_0'(xi)
  Vec response;  // q(T), the first-order reaction of the time-T map
  Trajectory orbit;
};

namespace detail {

inline OdeSystem variational_system(const EvolutionProblem& p) {
  const Index n = p.n;
  const Index N = n + n * n + n;
  OdeSystem sys;
  sys.dim = N;

  const auto rhs_nonlinear = [&p, n](double t, const Vec& v, bool with_drift) {
    Vec out(v.size());
    const auto x = v.head(n);
    const Eigen::Map<const Mat> Y(v.data() + n, n, n);
    const auto q = v.tail(n);
    const Mat J = problem_f_jacobian(p, t, x);

    Vec xdot = p.f ? p.f(t, x) : Vec(Vec::Zero(n));
    Mat Ydot = J * Y;
    Vec qdot = J * q + problem_g(p, t, x, 0.0);
    if (with_drift) {
      xdot += p.A * x;
      Ydot += p.A * Y;
      qdot += p.A * q;
    }
    out.head(n) = xdot;
    Eigen::Map<Mat>(out.data() + n, n, n) = Ydot;
    out.tail(n) = qdot;
    return out;
  };

  sys.rhs = [rhs_nonlinear](double t, const Vec& v) {
    return rhs_nonlinear(t, v, true);
  };
  if (!p.spectral.empty()) {
    // Drift acts block-wise on the orbit, on each variational column, and on
    // the response; the packed system inherits the structure verbatim.
    sys.spectral.reserve(p.spectral.size() * static_cast<std::size_t>(n + 2));
    for (Index rep = 0; rep < n + 2; ++rep)
      for (const auto& b : p.spectral) sys.spectral.push_back(b);
    sys.nonlinear = [rhs_nonlinear](double t, const Vec& v) {
      return rhs_nonlinear(t, v, false);
    };
  }
  return sys;
}

// Slice the leading block out of an augmented trajectory, dense data included
// (interpolation acts componentwise, so truncating coefficients is exact).
inline Trajectory head_block(const Trajectory& aug, Index n) {
  Trajectory out;
  out.t = aug.t;
  out.stats = aug.stats;
  out.xi = aug.xi.head(n);
  out.epsilon = aug.epsilon;
  out.x.reserve(aug.x.size());
  for (const auto& v : aug.x) out.x.push_back(v.head(n));
  out.segments.reserve(aug.segments.size());
  for (const auto& seg : aug.segments) {
    DenseSegment s;
    s.t0 = seg.t0;
    s.h = seg.h;
    s.hermite = seg.hermite;
    s.c.reserve(seg.c.size());
    for (const auto& v : seg.c) s.c.push_back(v.head(n));
    out.segments.push_back(std::move(s));
  }
  return out;
}

} // namespace detail

inline MonodromyData monodromy_and_response(const EvolutionProblem& p,
                                            const Vec& xi,
                                            const IntegratorOptions& opts = {}) {
  check_shapes(p);
  if (xi.size() != p.n) throw ConfigError("initial state dimension mismatch");
  const Index n = p.n;
  Vec v0 = Vec::Zero(n + n * n + n);
  v0.head(n) = xi;
  Eigen::Map<Mat>(v0.data() + n, n, n) = Mat::Identity(n, n);

  Trajectory aug = integrate_system(detail::variational_system(p), v0, p.period,
                                    opts, {}, xi.norm());
  MonodromyData md;
  md.base_point = xi;
  const Vec& vT = aug.terminal();
  md.monodromy = Eigen::Map<const Mat>(vT.data() + n, n, n);
  md.response = vT.tail(n);
  md.orbit = detail::head_block(aug, n);
  return md;
}

// (x(t, xi, eps) - x(t, xi, 0)) / eps on a shared time grid.  The grid times
// become exact integration nodes for both trajectories, so no interpolation
// error enters the difference.
inline std::vector<Vec> scaled_difference(const EvolutionProblem& p,
                                          const Vec& xi, double eps,
                                          std::span<const double> grid,
                                          const IntegratorOptions& opts = {}) {
  if (eps <= 0.0) throw DomainError("scaled difference requires eps > 0");
  if (grid.empty()) return {};
  const double t_end = grid.back();
  Trajectory pert = integrate(p, xi, eps, t_end, opts, grid);
  Trajectory unpert = integrate(p, xi, 0.0, t_end, opts, grid);
  std::vector<Vec> u;
  u.reserve(grid.size());
  for (double s : grid)
    u.push_back((pert.at_time(s) - unpert.at_time(s)) / eps);
  return u;
}

} // namespace bifkit
