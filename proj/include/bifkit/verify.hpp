#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "bifkit/detect.hpp"

namespace bifkit {

// On-demand invariant suite: the checks a model must pass for its analysis
// output to be trustworthy at the configured tolerances.  Used by the CLI
// verify subcommand and reused by the test suite.

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyRunOptions {
  IntegratorOptions integrator;
  std::uint64_t seed = 1729;
  unsigned threads = 1;
  Index grid_resolution = 21;
  MFirstTerm mode = MFirstTerm::Consistent;
  std::vector<double> epsilon_ladder = default_epsilon_ladder();
  double order_floor = 1e-9;     // errors below this are integrator noise
  double halving_floor = 1e-8;
  double min_order = 0.8;
};

namespace detail {

inline double fit_order(const std::vector<double>& eps,
                        const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double x = std::log(eps[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

} // namespace detail

// Scaled Poincare difference against the first-order response, with error
// halving under epsilon halving.
inline VerifyCheck check_flow_consistency(const EvolutionProblem& p,
                                          const FamilyChart& chart,
                                          const VerifyRunOptions& opts) {
  VerifyCheck c{"flow-consistency", false, ""};
  try {
    const Vec xi = chart.S(chart.h0);
    const MonodromyData md = monodromy_and_response(p, xi, opts.integrator);
    const Vec p0 = poincare(p, xi, 0.0, opts.integrator);
    const auto err_at = [&](double eps) {
      const Vec pe = poincare(p, xi, eps, opts.integrator);
      return (((pe - p0) / eps) - md.response).norm();
    };
    const double e1 = err_at(1e-3), e2 = err_at(5e-4);
    const double bound = 1e-2 * md.response.norm() + 1e-8;
    const bool small_enough = e1 <= bound;
    const bool halves = (e2 <= opts.halving_floor) ||
                        (e2 / e1 >= 0.4 && e2 / e1 <= 0.6);
    c.pass = small_enough && halves;
    c.detail = "err(1e-3) = " + detail::fmt(e1) + " (bound " +
               detail::fmt(bound) + "), err(5e-4) = " + detail::fmt(e2);
    if (e2 <= opts.halving_floor && small_enough)
      c.detail += "; halved error at noise floor";
  } catch (const Error& e) {
    c.detail = e.what();
  }
  return c;
}

// First-order limit of the complement correction: beta(h, eps)/eps must
// approach its predicted limit at O(eps).
inline VerifyCheck check_beta_limit(const EvolutionProblem& p,
                                    const FamilyChart& chart,
                                    const VerifyRunOptions& opts) {
  VerifyCheck c{"beta-limit", false, ""};
  try {
    ReductionOptions ropts;
    ropts.integrator = opts.integrator;
    Rng rng(opts.seed ^ 0xb5f3c6a9u);
    std::vector<Vec> hs = latin_hypercube_ball(chart, 3, rng);
    hs.push_back(chart.h0);
    const std::vector<double> ladder{1e-2, 1e-3, 1e-4};
    std::vector<double> errs;
    for (const double eps : ladder) {
      double worst = 0.0;
      for (const Vec& h : hs) {
        const BetaSolution bs = solve_beta(p, chart, h, eps, ropts);
        worst = std::max(worst, (bs.beta / eps - bs.limit_check).norm());
      }
      errs.push_back(worst);
    }
    double emax = 0.0;
    for (const double e : errs) emax = std::max(emax, e);
    if (emax <= opts.order_floor) {
      c.pass = true;
      c.detail = "correction errors at noise floor (max " +
                 detail::fmt(emax) + ")";
      return c;
    }
    const double order = detail::fit_order(ladder, errs);
    c.pass = order >= opts.min_order;
    c.detail = "errors {" + detail::fmt(errs[0]) + ", " +
               detail::fmt(errs[1]) + ", " + detail::fmt(errs[2]) +
               "}, fitted order " + detail::fmt(order);
  } catch (const Error& e) {
    c.detail = e.what();
  }
  return c;
}

// Finite-eps bifurcation function converges to its limit at O(eps),
// uniformly over a coarse grid in the chart ball.
inline VerifyCheck check_m_eps_convergence(const EvolutionProblem& p,
                                           const FamilyChart& chart,
                                           const VerifyRunOptions& opts) {
  VerifyCheck c{"m-eps-convergence", false, ""};
  try {
    ReductionOptions ropts;
    ropts.integrator = opts.integrator;
    const BifurcationFunctionEvaluator eval(p, chart, opts.mode, ropts);

    std::vector<Vec> hs;
    const double step = chart.r0 / std::sqrt(double(chart.k));
    std::vector<double> offs{-0.5 * step, 0.0, 0.5 * step};
    std::size_t total = 1;
    for (Index a = 0; a < chart.k; ++a) total *= offs.size();
    for (std::size_t idx = 0; idx < total; ++idx) {
      Vec h = chart.h0;
      std::size_t rem = idx;
      for (Index a = 0; a < chart.k; ++a) {
        h[a] += offs[rem % offs.size()];
        rem /= offs.size();
      }
      hs.push_back(h);
    }

    std::vector<Vec> limits;
    limits.reserve(hs.size());
    for (const Vec& h : hs) limits.push_back(eval(h));

    std::vector<double> eps_used, errs;
    for (const double eps : opts.epsilon_ladder) {
      double worst = 0.0;
      for (std::size_t i = 0; i < hs.size(); ++i) {
        const Vec me = bifurcation_function_eps(p, chart, hs[i], eps, ropts);
        worst = std::max(worst, (me - limits[i]).norm());
      }
      eps_used.push_back(eps);
      errs.push_back(worst);
    }
    double emax = 0.0;
    for (const double e : errs) emax = std::max(emax, e);
    if (emax <= opts.order_floor) {
      c.pass = true;
      c.detail = "finite-eps errors at noise floor (max " +
                 detail::fmt(emax) + ")";
      return c;
    }
    const double order = detail::fit_order(eps_used, errs);
    c.pass = order >= opts.min_order;
    c.detail = "max error " + detail::fmt(emax) + ", fitted order " +
               detail::fmt(order);
  } catch (const Error& e) {
    c.detail = e.what();
  }
  return c;
}

// Degree facts: identity, minus identity, complex powers, and stability of
// the winding computation under safe constant perturbations.
inline VerifyCheck check_degree_axioms(const VerifyRunOptions& opts) {
  VerifyCheck c{"degree-axioms", false, ""};
  try {
    std::string fail;
    const auto expect = [&](int got, int want, const std::string& what) {
      if (got != want && fail.empty())
        fail = what + ": got " + std::to_string(got) + ", want " +
               std::to_string(want);
    };

    expect(degree_1d([](double t) { return t; }, -1.0, 1.0).value, 1,
           "deg(identity, 1d)");
    expect(degree_1d([](double t) { return -t; }, -1.0, 1.0).value, -1,
           "deg(-identity, 1d)");
    const auto id2 = [](const Vec& x) { return x; };
    const auto neg2 = [](const Vec& x) { return Vec(-x); };
    const std::vector<Vec> circle = circle_polygon(Vec::Zero(2), 1.0);
    expect(degree_2d(id2, circle).value, 1, "deg(identity, 2d)");
    expect(degree_2d(neg2, circle).value, 1, "deg(-identity, 2d)");
    for (int m = 1; m <= 3; ++m) {
      const auto zpow = [m](const Vec& x) {
        std::complex<double> z(x[0], x[1]);
        const std::complex<double> w = std::pow(z, m);
        return Vec{{w.real(), w.imag()}};
      };
      expect(degree_2d(zpow, circle).value, m,
             "deg(z^" + std::to_string(m) + ")");
    }

    Rng rng(opts.seed ^ 0x7d3a1fc2u);
    for (int trial = 0; trial < 20 && fail.empty(); ++trial) {
      Mat A(2, 2);
      double det = 0.0;
      do {
        for (Index i = 0; i < 2; ++i)
          for (Index j = 0; j < 2; ++j)
            A(i, j) = 2.0 * uniform01(rng) - 1.0;
        det = A.determinant();
      } while (std::abs(det) < 0.1);
      const auto affine = [&](const Vec& x) { return Vec(A * x); };
      const int want = det > 0 ? 1 : -1;
      expect(index_nondegenerate(A).value, want, "sign(det) on random affine");
      const DegreeResult wind = degree_2d(affine, circle);
      expect(wind.value, want, "winding on random affine");

      double minb = std::numeric_limits<double>::infinity();
      for (const Vec& v : circle) minb = std::min(minb, (A * v).norm());
      const Vec shift = (0.4 * minb) * unit_vector(rng, 2);
      const auto shifted = [&](const Vec& x) { return Vec(A * x + shift); };
      expect(degree_2d(shifted, circle).value, want,
             "winding under safe constant shift");
    }

    c.pass = fail.empty();
    c.detail = fail.empty() ? "identity, reflection, powers, 20 affine maps"
                            : fail;
  } catch (const Error& e) {
    c.detail = e.what();
  }
  return c;
}

// Every predicted zero must continue to genuine orbits for small eps, with
// distances shrinking linearly; correction-based seeds must not lose to the
// plain family seed.
inline VerifyCheck check_continuation_soundness(const EvolutionProblem& p,
                                                const FamilyChart& chart,
                                                const VerifyRunOptions& opts) {
  VerifyCheck c{"continuation-soundness", false, ""};
  try {
    AnalyzeConfig cfg;
    cfg.grid_resolution = opts.grid_resolution;
    cfg.integrator = opts.integrator;
    cfg.epsilon_ladder = opts.epsilon_ladder;
    cfg.mode = opts.mode;
    cfg.seed = opts.seed;
    cfg.run_continuation = false; // continued below with seed comparison
    cfg.threads = opts.threads;
    const BifurcationReport rep = analyze(p, chart, cfg);
    if (rep.summary == verdict_name(Verdict::AssumptionFailure)) {
      c.detail = "analysis reported an assumption failure: " + rep.grid_note;
      return c;
    }

    ContinuationOptions copts;
    copts.reduction.integrator = opts.integrator;
    copts.newton.integrator = opts.integrator;
    copts.compare_plain_seed = true;

    std::size_t predicted = 0;
    std::string fail;
    for (const auto& z : rep.zeros) {
      if (z.verdict != Verdict::ExistencePredicted) continue;
      ++predicted;
      const ContinuationRecord rec =
          continue_periodic(p, chart, z.h, opts.epsilon_ladder, copts);
      const double floor =
          100.0 * copts.newton.tol_scale * (1.0 + chart.S(z.h).norm());
      for (const auto& e : rec.entries) {
        if (e.eps <= 1e-3 && !e.converged && fail.empty())
          fail = "continuation failed at eps = " + detail::fmt(e.eps);
        if (e.converged && e.naive_iterations >= 0 &&
            long(e.iterations) > e.naive_iterations && fail.empty())
          fail = "corrected seed needed more Newton steps than the plain "
                 "seed at eps = " +
                 detail::fmt(e.eps);
      }
      double slope = 0.0;
      if (continuation_order(rec, floor, &slope)) {
        if (slope < opts.min_order && fail.empty())
          fail = "distance slope " + detail::fmt(slope) + " below " +
                 detail::fmt(opts.min_order);
      }
    }
    c.pass = fail.empty();
    c.detail = fail.empty()
                   ? std::to_string(predicted) +
                         " predicted zero(s) continued along the ladder"
                   : fail;
  } catch (const Error& e) {
    c.detail = e.what();
  }
  return c;
}

inline std::vector<VerifyCheck> run_verification(const EvolutionProblem& p,
                                                 const FamilyChart& chart,
                                                 const VerifyRunOptions& opts = {}) {
  std::vector<VerifyCheck> out;
  out.push_back(check_flow_consistency(p, chart, opts));
  out.push_back(check_beta_limit(p, chart, opts));
  out.push_back(check_m_eps_convergence(p, chart, opts));
  out.push_back(check_degree_axioms(opts));
  out.push_back(check_continuation_soundness(p, chart, opts));
  return out;
}

} // namespace bifkit
