// Standalone acceptance gate: one criterion per invocation, one pass/fail
// line per sub-check, exit 0 only if the criterion holds.  Tolerances are
// pinned constants; convergence-order fits skip data below an absolute noise
// floor so that configurations satisfying an identity exactly pass on the
// strength of the identity rather than on a meaningless fit to noise.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "bifkit/config.hpp"
#include "bifkit/degree.hpp"
#include "bifkit/detect.hpp"
#include "bifkit/registry.hpp"

namespace {

using bifkit::EvolutionProblem;
using bifkit::FamilyChart;
using bifkit::Index;
using bifkit::Mat;
using bifkit::ModelBundle;
using bifkit::Rng;
using bifkit::Vec;

constexpr double pi = std::numbers::pi;

int subchecks_failed = 0;

bool sub(bool ok, const std::string& msg) {
  std::printf("  [%s] %s\n", ok ? "pass" : "FAIL", msg.c_str());
  if (!ok) ++subchecks_failed;
  return ok;
}

void note(const std::string& msg) {
  std::printf("  [note] %s\n", msg.c_str());
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// least-squares slope of log(err) against log(eps)
double loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(pts.size());
  for (const auto& [e, v] : pts) {
    const double x = std::log(e), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// order fit with a noise floor: points at or below the floor are excluded;
// fewer than two surviving points means the data sits in solver noise and
// the bound holds vacuously.  The floor may depend on eps: quantities formed
// by dividing an absolute solver error by eps have a 1/eps noise profile.
bool order_at_least(const std::vector<std::pair<double, double>>& pts,
                    const std::function<double(double)>& floor_at,
                    double min_order, const std::string& label) {
  std::vector<std::pair<double, double>> live;
  for (const auto& pt : pts)
    if (pt.second > floor_at(pt.first)) live.push_back(pt);
  if (live.size() < 2) {
    note(label + ": errors sit at the noise floor; order bound holds "
                 "vacuously");
    return sub(true, label + " (vacuous)");
  }
  const double slope = loglog_slope(live);
  return sub(slope >= min_order,
             label + fmt(": fitted order %.3f (need >= %.2f, %zu points)",
                         slope, min_order, live.size()));
}

bool order_at_least(const std::vector<std::pair<double, double>>& pts,
                    double floor_abs, double min_order,
                    const std::string& label) {
  return order_at_least(
      pts, [floor_abs](double) { return floor_abs; }, min_order, label);
}

EvolutionProblem scalar_decay() {
  EvolutionProblem p;
  p.n = 1;
  p.period = 1.0;
  p.A = Mat::Constant(1, 1, -1.0);
  p.g = [](double, const Vec&, double) { return Vec::Ones(1); };
  p.name = "scalar-decay";
  return p;
}

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names = {
      "harmonic_forced", "center_contraction", "forced_vdp",
      "galerkin_heat_osc"};
  return names;
}

// ---------------------------------------------------------------------------

// closed-form flow and first-order response of the scalar decay model
bool criterion1() {
  const EvolutionProblem p = scalar_decay();
  bool ok = true;
  for (const double eps : {1e-1, 1e-2, 1e-3}) {
    const double got = bifkit::poincare(p, v1(2.0), eps)[0];
    const double want = 2.0 * std::exp(-1.0) + eps * (1.0 - std::exp(-1.0));
    ok &= sub(std::abs(got - want) <= 1e-8,
              fmt("x(1) at eps = %g: |error| = %.3e (<= 1e-8)", eps,
                  std::abs(got - want)));
  }
  const auto md = bifkit::monodromy_and_response(p, v1(2.0));
  const double q_err = std::abs(md.response[0] - (1.0 - std::exp(-1.0)));
  ok &= sub(q_err <= 1e-8, fmt("first-order response: |error| = %.3e", q_err));
  return ok;
}

// scaled Poincare difference matches the response on every model and halves
// with eps
bool criterion2() {
  bool ok = true;
  for (const auto& name : model_names()) {
    const ModelBundle b = bifkit::registry_get(name);
    const Vec xi = b.chart.S(b.chart.h0);
    const auto md = bifkit::monodromy_and_response(b.problem, xi);
    const Vec p0 = bifkit::poincare(b.problem, xi, 0.0);
    const auto err_at = [&](double eps) {
      const Vec pe = bifkit::poincare(b.problem, xi, eps);
      return (((pe - p0) / eps) - md.response).norm();
    };
    const double e1 = err_at(1e-3);
    const double budget = 1e-2 * md.response.norm() + 1e-8;
    ok &= sub(e1 <= budget, name + fmt(": error %.3e at eps = 1e-3 (<= %.3e)",
                                       e1, budget));
    if (e1 > 1e-8) {
      const double e2 = err_at(5e-4);
      const double ratio = e2 / e1;
      ok &= sub(ratio >= 0.4 && ratio <= 0.6,
                name + fmt(": halving ratio %.3f in [0.4, 0.6]", ratio));
    } else {
      note(name + ": the scaled difference already matches the response at "
                  "the 1e-8 floor; halving holds vacuously");
      ok &= sub(true, name + ": halving (vacuous)");
    }
  }
  return ok;
}

// the family is made of fixed points: (P0'(S(h)) - I) S'(h) vanishes
bool criterion3() {
  bool ok = true;
  for (const std::string name :
       {std::string("center_contraction"), std::string("harmonic_forced")}) {
    const ModelBundle b = bifkit::registry_get(name);
    const double half = b.chart.r0 / std::sqrt(2.0);
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        const Vec h = v2(-half + 2.0 * half * i / 4.0,
                         -half + 2.0 * half * j / 4.0);
        const auto md =
            bifkit::monodromy_and_response(b.problem, b.chart.S(h));
        const Mat drift =
            (md.monodromy - Mat::Identity(b.problem.n, b.problem.n)) *
            b.chart.S_prime(h);
        worst = std::max(worst, drift.norm());
      }
    }
    ok &= sub(worst <= 1e-6,
              name + fmt(": max |(P0' - I) S'| over 5x5 grid = %.3e", worst));
  }
  return ok;
}

// complement correction: exact in the constant-forcing contraction, first
// order against its limit everywhere the complement operator is invertible
bool criterion4() {
  bool ok = true;
  {
    const ModelBundle cc = bifkit::registry_get("center_contraction");
    for (const Vec& h : {v2(0.0, 0.0), v2(0.3, -0.4), v2(-0.5, 0.2)}) {
      for (const double eps : {1e-2, 1e-3}) {
        const auto bs = bifkit::solve_beta(cc.problem, cc.chart, h, eps);
        const double err = std::abs(bs.beta[2] - eps);
        ok &= sub(err <= 1e-8,
                  fmt("constant forcing: |beta_3 - eps| = %.3e at h = "
                      "(%.1f, %.1f), eps = %g",
                      err, h[0], h[1], eps));
      }
    }
  }
  for (const auto& name : model_names()) {
    const ModelBundle b = bifkit::registry_get(name);
    const Vec h = 0.2 * Vec::Ones(b.chart.k);
    std::vector<std::pair<double, double>> pts;
    for (const double eps : {1e-2, 1e-3, 1e-4}) {
      const auto bs = bifkit::solve_beta(b.problem, b.chart, h, eps);
      pts.push_back({eps, (bs.beta / eps - bs.limit_check).norm()});
    }
    // beta is solved to an absolute tolerance, so beta/eps carries a 1e-10/eps
    // noise profile; models whose correction is exact sit below it entirely
    ok &= order_at_least(
        pts, [](double eps) { return 1e-10 / eps; }, 0.8,
        name + ": |beta/eps - limit| order");
  }
  return ok;
}

// the stated reference oracle for the forced linear oscillator, asserted
// exactly as written; the unit tests freeze the independently derived
// closed forms this implementation reproduces
bool criterion5() {
  const ModelBundle b = bifkit::registry_get("harmonic_forced");
  bool ok = true;
  {
    double worst1 = 0.0, worst2 = 0.0;
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) {
        const Vec h = v2(-2.0 + 4.0 * i / 6.0, -2.0 + 4.0 * j / 6.0);
        const Vec M = bifkit::bifurcation_function(b.problem, b.chart, h);
        worst1 = std::max(worst1, std::abs(M[0] - pi * h[0]));
        worst2 = std::max(worst2, std::abs(M[1] - pi * (1.0 - h[1])));
      }
    }
    ok &= sub(worst1 <= 1e-6,
              fmt("M1 = pi h1 on the 7x7 grid: max error %.3e", worst1));
    ok &= sub(worst2 <= 1e-6,
              fmt("M2 = pi (lambda - h2) on the 7x7 grid: max error %.3e",
                  worst2));
  }
  bifkit::AnalyzeConfig cfg;
  cfg.run_continuation = false;
  const auto rep = bifkit::analyze(b.problem, b.chart, cfg);
  const bool one_zero = rep.zeros.size() == 1;
  ok &= sub(one_zero && (rep.zeros[0].h - v2(0.0, 1.0)).norm() <= 1e-8,
            one_zero ? fmt("unique isolated zero at (0, 1): |error| = %.3e",
                           (rep.zeros[0].h - v2(0.0, 1.0)).norm())
                     : fmt("unique isolated zero: found %zu zeros",
                           rep.zeros.size()));
  const bool has_index = one_zero && rep.zeros[0].index.has_value();
  ok &= sub(has_index && rep.zeros[0].index->value == -1,
            has_index ? fmt("index -1: computed index %d",
                            rep.zeros[0].index->value)
                      : "index -1: no index computed");
  return ok;
}

// degree axioms, exactly
bool criterion6() {
  bool ok = true;
  const auto ident1 = [](double t) { return t; };
  ok &= sub(bifkit::degree_1d(ident1, -1.0, 1.0).value == 1,
            "deg(identity) = 1 for k = 1");
  ok &= sub(bifkit::degree_1d([](double t) { return -t; }, -1.0, 1.0).value ==
                -1,
            "deg(-I) = -1 for k = 1");
  const auto poly = bifkit::circle_polygon(v2(0.0, 0.0), 1.0);
  const auto ident2 = [](const Vec& x) { return x; };
  ok &= sub(bifkit::degree_2d(ident2, poly).value == 1,
            "deg(identity) = 1 for k = 2");
  ok &= sub(bifkit::degree_2d([](const Vec& x) { return Vec(-x); }, poly)
                    .value == 1,
            "deg(-I) = +1 for k = 2");
  const auto square = [](const Vec& x) {
    return v2(x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]);
  };
  ok &= sub(bifkit::degree_2d(square, poly).value == 2, "deg(z^2) = 2");

  Rng rng(20240817u);
  int stable = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Mat C(2, 2);
    double det = 0.0;
    do {
      for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j)
          C(i, j) = 2.0 * bifkit::uniform01(rng) - 1.0;
      det = C.determinant();
    } while (std::abs(det) < 0.1);
    const Vec d = v2(0.4 * (2.0 * bifkit::uniform01(rng) - 1.0),
                     0.4 * (2.0 * bifkit::uniform01(rng) - 1.0));
    const Vec zero = C.partialPivLu().solve(-d);
    const auto poly_z = bifkit::circle_polygon(zero, 1.0);
    const auto F = [&](const Vec& x) { return Vec(C * x + d); };
    double boundary_min = std::numeric_limits<double>::infinity();
    for (const Vec& vtx : poly_z)
      boundary_min = std::min(boundary_min, F(vtx).norm());
    const Vec shift =
        0.4 * boundary_min * bifkit::unit_vector(rng, 2);
    const auto G = [&](const Vec& x) { return Vec(C * x + d + shift); };
    const int want = det > 0 ? 1 : -1;
    if (bifkit::degree_2d(F, poly_z).value == want &&
        bifkit::degree_2d(G, poly_z).value == want)
      ++stable;
  }
  ok &= sub(stable == 20,
            fmt("homotopy-perturbation invariance on %d/20 random affine "
                "maps",
                stable));
  return ok;
}

// every predicted zero continues to genuine periodic orbits at first order
bool criterion7() {
  bool ok = true;
  for (const auto& name : model_names()) {
    const ModelBundle b = bifkit::registry_get(name);
    bifkit::AnalyzeConfig cfg;
    const auto rep = bifkit::analyze(b.problem, b.chart, cfg);
    std::size_t predicted = 0;
    for (std::size_t zi = 0, ci = 0; zi < rep.zeros.size(); ++zi) {
      if (rep.zeros[zi].verdict != bifkit::Verdict::ExistencePredicted)
        continue;
      const auto& rec = rep.continuations.at(ci++);
      ++predicted;
      bool small_converged = true;
      for (const auto& e : rec.entries)
        if (e.eps <= 1e-3 * (1.0 + 1e-12)) small_converged &= e.converged;
      ok &= sub(small_converged,
                name + fmt(": Newton converged for every eps <= 1e-3 at zero "
                           "%zu",
                           zi));
      const double floor_d =
          100.0 * 1e-10 * (1.0 + b.chart.S(rec.h_star).norm());
      std::vector<std::pair<double, double>> pts;
      for (const auto& e : rec.entries)
        if (e.converged && e.distance > floor_d)
          pts.push_back({e.eps, e.distance});
      ok &= order_at_least(pts, floor_d, 0.8,
                           name + fmt(": continuation distance order at zero "
                                      "%zu",
                                      zi));
      if (name == "harmonic_forced") {
        double worst = 0.0;
        for (const auto& e : rec.entries)
          if (e.converged) worst = std::max(worst, (e.xi - v2(0.0, 1.0)).norm());
        ok &= sub(worst <= 1e-8,
                  fmt("harmonic_forced: continued orbit equals (0, lambda) "
                      "to %.3e",
                      worst));
      }
    }
    if (predicted == 0)
      note(name + ": no ExistencePredicted zeros; criterion holds vacuously");
  }
  return ok;
}

// necessity: a nonzero constant bifurcation function forbids nearby orbits,
// and converged families land on zeros of M
bool criterion8() {
  bool ok = true;
  {
    const ModelBundle cc = bifkit::registry_get(
        "center_contraction", {{"gx_cos", 0.3}, {"gy_cos", 0.7}});
    const Vec center = cc.chart.S(cc.chart.h0);
    for (const double eps : {1e-2, 1e-3}) {
      const auto sr =
          bifkit::periodic_orbit_search(cc.problem, center, 0.5, eps, 20, 2024);
      ok &= sub(sr.found.empty(),
                fmt("constant planar M: no orbit within radius 0.5 at eps = "
                    "%g (%zu seeds)",
                    eps, sr.seeds_tried));
    }
  }
  const auto check_limit = [&](const std::string& name, const Vec& h_star) {
    const ModelBundle b = bifkit::registry_get(name);
    // the extrapolated limit inherits the Newton error amplified by 1/eps,
    // so the orbits feeding it are solved tighter than the 1e-6 budget
    bifkit::ContinuationOptions copts;
    copts.newton.tol_scale = 1e-13;
    copts.newton.integrator.abs_tol = 1e-13;
    copts.newton.integrator.rel_tol = 1e-12;
    const auto rec = bifkit::continue_periodic(
        b.problem, b.chart, h_star, bifkit::default_epsilon_ladder(), copts);
    std::vector<std::pair<double, Vec>> observed;
    for (const auto& e : rec.entries)
      if (e.converged) observed.push_back({e.eps, e.xi});
    if (observed.size() < 3) {
      ok &= sub(false, name + ": not enough converged entries");
      return;
    }
    bifkit::NecessityOptions nopts;
    nopts.reduction.integrator.abs_tol = 1e-13;
    nopts.reduction.integrator.rel_tol = 1e-12;
    const auto nec = bifkit::necessity_check(b.problem, b.chart, observed,
                                             nopts);
    ok &= sub(nec.pass && nec.m_norm <= 1e-6,
              name + fmt(": |M| at the continuation limit = %.3e (<= 1e-6)",
                         nec.m_norm));
  };
  check_limit("harmonic_forced", v2(0.0, 1.0));
  check_limit("galerkin_heat_osc", v2(0.0, 1.0));
  {
    const ModelBundle vdp = bifkit::registry_get("forced_vdp");
    const auto zs = bifkit::find_zeros(
        [&](const Vec& h) {
          return bifkit::bifurcation_function(vdp.problem, vdp.chart, h);
        },
        vdp.chart);
    if (zs.zeros.size() == 1) {
      check_limit("forced_vdp", zs.zeros[0].h);
    } else {
      ok &= sub(false, fmt("forced_vdp: expected one zero, found %zu",
                           zs.zeros.size()));
    }
  }
  return ok;
}

// the eps-aware bifurcation function converges to its limit at first order
bool criterion9() {
  bool ok = true;
  const std::vector<Vec> grid = {v2(0.0, 0.0), v2(0.5, 0.3), v2(-0.4, 0.8),
                                 v2(1.0, -0.5)};
  for (const std::string name :
       {std::string("harmonic_forced"), std::string("forced_vdp")}) {
    const ModelBundle b = bifkit::registry_get(name);
    std::vector<std::pair<double, double>> pts;
    for (const double eps : {1e-2, 1e-3, 1e-4}) {
      double worst = 0.0;
      for (const Vec& h : grid) {
        const Vec me =
            bifkit::bifurcation_function_eps(b.problem, b.chart, h, eps);
        const Vec m = bifkit::bifurcation_function(b.problem, b.chart, h);
        worst = std::max(worst, (me - m).norm());
      }
      pts.push_back({eps, worst});
    }
    ok &= order_at_least(pts, 1e-9, 0.8, name + ": |M_eps - M| grid order");
  }
  return ok;
}

// the scaled difference stays uniformly Lipschitz in the initial condition
bool criterion10() {
  const ModelBundle b = bifkit::registry_get("forced_vdp");
  const Vec p0 = Vec::Zero(2);
  Rng rng(424242u);
  std::vector<std::pair<Vec, Vec>> pairs;
  while (pairs.size() < 50) {
    const Vec xi =
        p0 + std::sqrt(bifkit::uniform01(rng)) * bifkit::unit_vector(rng, 2);
    const Vec zeta =
        p0 + std::sqrt(bifkit::uniform01(rng)) * bifkit::unit_vector(rng, 2);
    if ((xi - zeta).norm() > 1e-3) pairs.push_back({xi, zeta});
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  bool ok = true;
  for (const double eps : {1e-1, 1e-2, 1e-3}) {
    const auto u_T = [&](const Vec& x) {
      const Vec pe = bifkit::poincare(b.problem, x, eps);
      const Vec pu = bifkit::poincare(b.problem, x, 0.0);
      return Vec((pe - pu) / eps);
    };
    double max_ratio = 0.0;
    for (const auto& [xi, zeta] : pairs)
      max_ratio = std::max(max_ratio,
                           (u_T(xi) - u_T(zeta)).norm() / (xi - zeta).norm());
    sub(true, fmt("max Lipschitz ratio %.4f at eps = %g", max_ratio, eps));
    lo = std::min(lo, max_ratio);
    hi = std::max(hi, max_ratio);
  }
  ok &= sub(hi / lo < 2.0,
            fmt("max ratio varies by %.3fx across eps (< 2x)", hi / lo));
  return ok;
}

bool run(int n) {
  switch (n) {
  case 1: return criterion1();
  case 2: return criterion2();
  case 3: return criterion3();
  case 4: return criterion4();
  case 5: return criterion5();
  case 6: return criterion6();
  case 7: return criterion7();
  case 8: return criterion8();
  case 9: return criterion9();
  case 10: return criterion10();
  default: return false;
  }
}

} // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <criterion 1..10 | all>\n", argv[0]);
    return 2;
  }
  if (std::strcmp(argv[1], "all") == 0) {
    bool all = true;
    for (int n = 1; n <= 10; ++n) {
      std::printf("criterion %d:\n", n);
      const bool ok = run(n);
      std::printf("criterion %d: %s\n", n, ok ? "PASS" : "FAIL");
      all &= ok;
    }
    return all ? 0 : 1;
  }
  const int n = std::atoi(argv[1]);
  if (n < 1 || n > 10) {
    std::fprintf(stderr, "criterion number must be 1..10\n");
    return 2;
  }
  std::printf("criterion %d:\n", n);
  const bool ok = run(n);
  std::printf("criterion %d: %s\n", n, ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}
