#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bifkit/degree.hpp"
#include "bifkit/reduction.hpp"
#include "bifkit/validate.hpp"

namespace bifkit {

inline std::vector<double> default_epsilon_ladder() {
  std::vector<double> v(8);
  for (int i = 0; i < 8; ++i) v[i] = std::pow(10.0, -1.0 - 3.0 * i / 7.0);
  return v;
}

namespace detail {

// Static-partition parallel loop. Worker exceptions are rethrown in thread
// order so failures are deterministic; body must confine per-index effects
// to its own slot.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  const unsigned t = std::min<unsigned>(threads, unsigned(count));
  std::vector<std::exception_ptr> errs(t);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (unsigned w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = count * w / t, hi = count * (w + 1) / t;
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Zero search for the reduced k-dimensional map over the chart ball.

struct GridSample {
  Vec h;
  Vec M;
};

struct ZeroSearchOptions {
  Index grid_resolution = 21; // points per axis over [h0 - r0, h0 + r0]
  std::size_t polish_max_iter = 50;
  double dedupe_tol = 1e-6;
  double isolation_factor = 10.0;  // sphere min must beat factor * residual
  double residual_floor = 1e-12;   // lower bound used in the threshold above
  std::size_t isolation_samples_per_dim = 64;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct ZeroCandidate {
  Vec h;
  double residual = 0.0;
};

struct RejectedCandidate {
  Vec h;
  double residual = 0.0;
  std::string reason;
};

struct ZeroSearchResult {
  std::vector<ZeroCandidate> zeros;         // isolated, polished, deduped
  std::vector<RejectedCandidate> rejected;
  std::vector<GridSample> grid;             // successful grid evaluations
  std::size_t grid_failures = 0;
  std::string first_grid_failure;
  double cell = 0.0;             // grid spacing
  double isolation_radius = 0.0; // 2 * cell
  double m_scale = 0.0;          // max |M| over the grid
  std::string note;              // continuum-of-zeros style diagnostics
};

// Damped Newton with finite-difference Jacobian and backtracking.  Returns
// the final point; convergence is judged by the caller on the residual.
namespace detail {

inline Vec polish_zero(const std::function<Vec(const Vec&)>& F, Vec h,
                       std::size_t max_iter, double* out_residual) {
  Vec val = F(h);
  double best = val.norm();
  for (std::size_t it = 0; it < max_iter; ++it) {
    const double scale = 1.0 + h.norm();
    if (best <= 1e-15 * scale) break;
    const Mat J = fd_jacobian(F, h);
    const Vec step = Eigen::ColPivHouseholderQR<Mat>(J).solve(-val);
    if (!step.allFinite() || step.norm() <= 1e-14 * scale) break;
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 25; ++half, t *= 0.5) {
      const Vec trial = h + t * step;
      const Vec fv = F(trial);
      const double fn = fv.norm();
      if (fn < best * (1.0 - 1e-4 * t)) {
        h = trial;
        val = fv;
        best = fn;
        improved = true;
        break;
      }
    }
    if (!improved) break;
    if (t * step.norm() <= 1e-13 * scale) break;
  }
  *out_residual = best;
  return h;
}

} // namespace detail

// Grid scan, local-minimum polishing, dedupe, and isolation filtering.
// Isolation means two things at grid scale: no other polished candidate may
// sit within the isolation radius (a zero continuum shows up as a chain of
// mutually close candidates), and the map must clear a multiple of the
// polished residual on a sampled sphere of that radius.
inline ZeroSearchResult
find_zeros(const std::function<Vec(const Vec&)>& M, const FamilyChart& chart,
           const ZeroSearchOptions& opts = {}) {
  if (opts.grid_resolution < 3)
    throw ConfigError("grid resolution must be at least 3 per axis");
  const Index k = chart.k;
  const Index R = opts.grid_resolution;
  ZeroSearchResult out;
  out.cell = 2.0 * chart.r0 / double(R - 1);
  out.isolation_radius = 2.0 * out.cell;

  // enumerate lattice points inside the ball
  std::size_t total = 1;
  for (Index a = 0; a < k; ++a) total *= std::size_t(R);
  std::vector<Vec> points(total);
  std::vector<char> in_ball(total, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vec h = chart.h0;
    std::size_t rem = idx;
    for (Index a = 0; a < k; ++a) {
      const Index ia = Index(rem % std::size_t(R));
      rem /= std::size_t(R);
      h[a] += -chart.r0 + out.cell * double(ia);
    }
    points[idx] = h;
    in_ball[idx] = (points[idx] - chart.h0).norm() <= chart.r0 + 1e-12;
  }

  std::vector<std::optional<Vec>> values(total);
  std::vector<std::string> failures(total);
  detail::parallel_for(total, opts.threads, [&](std::size_t i) {
    if (!in_ball[i]) return;
    try {
      values[i] = M(points[i]);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  std::vector<double> norms(total, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < total; ++i) {
    if (!in_ball[i]) continue;
    if (values[i]) {
      out.grid.push_back({points[i], *values[i]});
      norms[i] = values[i]->norm();
      out.m_scale = std::max(out.m_scale, norms[i]);
    } else {
      ++out.grid_failures;
      if (out.first_grid_failure.empty()) out.first_grid_failure = failures[i];
    }
  }
  if (out.grid.empty()) return out;

  // local minima of |M| against axis neighbors
  std::vector<std::size_t> seeds;
  std::vector<std::size_t> strides(k);
  {
    std::size_t s = 1;
    for (Index a = 0; a < k; ++a) {
      strides[a] = s;
      s *= std::size_t(R);
    }
  }
  for (std::size_t idx = 0; idx < total; ++idx) {
    if (!values[idx]) continue;
    bool is_min = true;
    std::size_t rem = idx;
    for (Index a = 0; a < k && is_min; ++a) {
      const Index ia = Index(rem % std::size_t(R));
      rem /= std::size_t(R);
      if (ia > 0 && norms[idx - strides[a]] < norms[idx]) is_min = false;
      if (ia + 1 < R && norms[idx + strides[a]] < norms[idx]) is_min = false;
    }
    if (is_min) seeds.push_back(idx);
  }

  // polish each seed; accept only residuals consistent with a genuine zero
  const double accept_tol = std::max(1e-9, 1e-7 * out.m_scale);
  std::vector<ZeroCandidate> candidates;
  for (const std::size_t idx : seeds) {
    double res = 0.0;
    Vec h;
    try {
      h = detail::polish_zero(M, points[idx], opts.polish_max_iter, &res);
    } catch (const Error& e) {
      out.rejected.push_back(
          {points[idx], norms[idx],
           std::string("polish aborted: ") + e.what()});
      continue;
    }
    if (!(res <= accept_tol)) {
      // a local minimum of |M| that is not a zero; not worth reporting
      continue;
    }
    if ((h - chart.h0).norm() > chart.r0 + 1e-9) {
      out.rejected.push_back({h, res, "polished point left the chart ball"});
      continue;
    }
    // dedupe against kept candidates
    bool merged = false;
    for (auto& c : candidates) {
      if ((c.h - h).norm() <= opts.dedupe_tol) {
        if (res < c.residual) c = {h, res};
        merged = true;
        break;
      }
    }
    if (!merged) candidates.push_back({h, res});
  }

  // isolation: proximity clause first (free), then the sampled-sphere clause
  std::size_t isolation_rejections = 0;
  std::vector<ZeroCandidate> survivors;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < candidates.size(); ++j)
      if (j != i)
        nearest = std::min(nearest,
                           (candidates[i].h - candidates[j].h).norm());
    if (nearest <= out.isolation_radius) {
      out.rejected.push_back(
          {candidates[i].h, candidates[i].residual,
           "not isolated: another zero candidate lies within the isolation "
           "radius " +
               std::to_string(out.isolation_radius)});
      ++isolation_rejections;
      continue;
    }
    survivors.push_back(candidates[i]);
  }
  for (const auto& c : survivors) {
    IsolationOptions iso;
    iso.samples_per_dim = opts.isolation_samples_per_dim;
    iso.seed = opts.seed ^ 0x5bd1e995u;
    const double threshold =
        opts.isolation_factor * std::max(c.residual, opts.residual_floor);
    double observed = 0.0;
    Vec min_sample;
    try {
      observed =
          isolation_min_norm(M, c.h, out.isolation_radius, iso, &min_sample);
    } catch (const Error& e) {
      out.rejected.push_back(
          {c.h, c.residual,
           std::string("isolation sampling aborted: ") + e.what()});
      ++isolation_rejections;
      continue;
    }
    if (!(observed > threshold)) {
      out.rejected.push_back(
          {c.h, c.residual,
           "not isolated: sphere minimum " + std::to_string(observed) +
               " does not exceed " + std::to_string(threshold)});
      ++isolation_rejections;
      continue;
    }
    // The sampled minimum alone cannot refute a zero curve through the
    // sphere: samples straddle the curve without landing on it.  Polishing
    // the minimizing sample settles it; converging back to the candidate
    // confirms isolation, converging to a distinct nearby zero refutes it.
    try {
      double probe_res = 0.0;
      const Vec probe =
          detail::polish_zero(M, min_sample, opts.polish_max_iter, &probe_res);
      const double dist = (probe - c.h).norm();
      if (probe_res <= accept_tol && dist > opts.dedupe_tol &&
          dist <= 1.1 * out.isolation_radius) {
        out.rejected.push_back(
            {c.h, c.residual,
             "not isolated: a second zero lies at distance " +
                 std::to_string(dist) + " inside the isolation neighborhood"});
        ++isolation_rejections;
        continue;
      }
    } catch (const Error&) {
      // probe inconclusive; the sampled-minimum clause already passed
    }
    out.zeros.push_back(c);
  }
  if (isolation_rejections >= 3)
    out.note = "multiple zero candidates failed the isolation test; the zero "
               "set likely contains a continuum";

  std::sort(out.zeros.begin(), out.zeros.end(),
            [](const ZeroCandidate& a, const ZeroCandidate& b) {
              for (Index i = 0; i < a.h.size(); ++i) {
                if (a.h[i] < b.h[i] - 1e-15) return true;
                if (a.h[i] > b.h[i] + 1e-15) return false;
              }
              return false;
            });
  return out;
}

// ---------------------------------------------------------------------------
// Chart coordinates of a state near the family: Gauss-Newton minimizer of
// |S(h) - xi| started from the chart center.

inline Vec chart_coordinates(const FamilyChart& chart, const Vec& xi,
                             std::size_t max_iter = 50) {
  Vec h = chart.h0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Vec r = chart.S(h) - xi;
    const Mat J = chart_jacobian(chart, h);
    const Vec step =
        Eigen::ColPivHouseholderQR<Mat>(J.transpose() * J)
            .solve(J.transpose() * r);
    h -= step;
    if (step.norm() <= 1e-12 * (1.0 + h.norm())) break;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Direct Newton continuation of periodic orbits of the full system.

struct PeriodicNewtonOptions {
  IntegratorOptions integrator;
  std::size_t max_iter = 30;
  double tol_scale = 1e-10; // tol = tol_scale * (1 + |xi|)
};

struct PeriodicNewtonResult {
  Vec xi;
  bool converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;
};

inline PeriodicNewtonResult newton_periodic(const EvolutionProblem& p,
                                            const Vec& xi0, double eps,
                                            const PeriodicNewtonOptions& opts = {}) {
  const auto G = [&](const Vec& xi) {
    return Vec(poincare(p, xi, eps, opts.integrator) - xi);
  };
  PeriodicNewtonResult out;
  out.xi = xi0;
  Vec val = G(out.xi);
  double best = val.norm();
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    const double tol = opts.tol_scale * (1.0 + out.xi.norm());
    out.residual = best;
    if (best <= tol) {
      out.converged = true;
      return out;
    }
    const Mat J = fd_jacobian(G, out.xi);
    const Vec step = Eigen::ColPivHouseholderQR<Mat>(J).solve(-val);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 25; ++half, t *= 0.5) {
      const Vec trial = out.xi + t * step;
      double fn;
      Vec fv;
      try {
        fv = G(trial);
        fn = fv.norm();
      } catch (const FlowError&) {
        continue; // trial step blew up; shorten it
      }
      if (fn < best) {
        out.xi = trial;
        val = fv;
        best = fn;
        improved = true;
        break;
      }
    }
    out.iterations = it + 1;
    if (!improved) break;
  }
  out.residual = best;
  out.converged = best <= opts.tol_scale * (1.0 + out.xi.norm());
  return out;
}

// ---------------------------------------------------------------------------
// Continuation ladder at a predicted zero.

struct ContinuationEntry {
  double eps = 0.0;
  Vec seed;
  bool seed_used_correction = false; // complement correction vs plain S(h*)
  Vec xi;
  bool converged = false;
  std::size_t iterations = 0;
  double displacement_norm = 0.0;
  double distance = 0.0; // |xi - S(h*)|
  long naive_iterations = -1; // Newton count from the plain seed, -1 if unmeasured or unconverged
  std::string note;
};

struct ContinuationRecord {
  Vec h_star;
  std::vector<ContinuationEntry> entries;
};

struct ContinuationOptions {
  ReductionOptions reduction;
  PeriodicNewtonOptions newton;
  bool compare_plain_seed = false;
};

inline ContinuationRecord continue_periodic(const EvolutionProblem& p,
                                            const FamilyChart& chart,
                                            const Vec& h_star,
                                            const std::vector<double>& ladder,
                                            const ContinuationOptions& opts = {}) {
  ContinuationRecord rec;
  rec.h_star = h_star;
  const Vec s = chart.S(h_star);
  for (const double eps : ladder) {
    ContinuationEntry e;
    e.eps = eps;
    e.seed = s;
    try {
      const BetaSolution bs = solve_beta(p, chart, h_star, eps, opts.reduction);
      e.seed = s + bs.beta;
      e.seed_used_correction = true;
    } catch (const Error& ex) {
      e.note = std::string("correction seed unavailable (") + ex.what() +
               "); falling back to the family point";
    }
    try {
      const PeriodicNewtonResult nr = newton_periodic(p, e.seed, eps, opts.newton);
      e.xi = nr.xi;
      e.converged = nr.converged;
      e.iterations = nr.iterations;
      e.displacement_norm = nr.residual;
      e.distance = (nr.xi - s).norm();
    } catch (const FlowError& ex) {
      e.xi = e.seed;
      e.converged = false;
      e.displacement_norm = std::numeric_limits<double>::infinity();
      e.distance = 0.0;
      e.note += std::string(" flow diverged from the seed: ") + ex.what();
    }
    if (opts.compare_plain_seed) {
      try {
        const PeriodicNewtonResult nr = newton_periodic(p, s, eps, opts.newton);
        if (nr.converged) e.naive_iterations = long(nr.iterations);
      } catch (const FlowError&) {
      }
    }
    rec.entries.push_back(std::move(e));
  }
  return rec;
}

// Least-squares slope of log(distance) against log(eps) over converged
// entries with distances above the noise floor.  Returns false when fewer
// than two usable points remain (the fit is then vacuous).
inline bool continuation_order(const ContinuationRecord& rec, double noise_floor,
                               double* slope) {
  std::vector<double> lx, ly;
  for (const auto& e : rec.entries) {
    if (!e.converged || !(e.distance > noise_floor)) continue;
    lx.push_back(std::log(e.eps));
    ly.push_back(std::log(e.distance));
  }
  if (lx.size() < 2) return false;
  const double n = double(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  *slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return true;
}

// ---------------------------------------------------------------------------
// Necessity: a family of periodic orbits surviving to eps -> 0 must sit over
// a zero of the bifurcation function.  The limiting state is extrapolated to
// eps = 0 (quadratically when three points are available), mapped to chart
// coordinates, and the function is evaluated there.

struct NecessityOptions {
  ReductionOptions reduction;
  MFirstTerm mode = MFirstTerm::Consistent;
  double tol = 1e-6;
  double monotonicity_slack = 1.5;
};

struct NecessityResult {
  bool pass = false;
  Vec h_limit;
  Vec xi_limit;
  double m_norm = 0.0;
  std::string note;
};

inline NecessityResult
necessity_check(const EvolutionProblem& p, const FamilyChart& chart,
                const std::vector<std::pair<double, Vec>>& observed,
                const NecessityOptions& opts = {}) {
  if (observed.empty())
    throw DomainError("necessity check needs at least one observed solution");
  std::vector<std::pair<double, Vec>> seq = observed;
  std::sort(seq.begin(), seq.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  NecessityResult out;
  const std::size_t m = seq.size();
  if (m >= 3) {
    // quadratic Lagrange extrapolation to eps = 0 from the three smallest
    const double e0 = seq[m - 3].first, e1 = seq[m - 2].first,
                 e2 = seq[m - 1].first;
    const double w0 = e1 * e2 / ((e0 - e1) * (e0 - e2));
    const double w1 = e0 * e2 / ((e1 - e0) * (e1 - e2));
    const double w2 = e0 * e1 / ((e2 - e0) * (e2 - e1));
    out.xi_limit =
        w0 * seq[m - 3].second + w1 * seq[m - 2].second + w2 * seq[m - 1].second;
    out.note = "limit state quadratically extrapolated to eps = 0";
  } else {
    out.xi_limit = seq.back().second;
    out.note = "limit state taken from the smallest eps entry";
  }

  out.h_limit = chart_coordinates(chart, out.xi_limit);
  const Vec anchor = chart.S(out.h_limit);
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& [eps, xi] : seq) {
    const double d = (xi - anchor).norm();
    if (d > opts.monotonicity_slack * prev + 1e-12)
      throw DomainError(
          "observed solutions do not approach the family monotonically; "
          "necessity check preconditions are not met");
    prev = d;
  }

  out.m_norm =
      bifurcation_function(p, chart, out.h_limit, opts.mode, opts.reduction)
          .norm();
  out.pass = out.m_norm <= opts.tol;
  return out;
}

// Seed-cloud search for periodic orbits near a state.  Used for the
// contrapositive reading of necessity: when the bifurcation function is
// bounded away from zero along the family, no orbit should be found.

struct OrbitSearchResult {
  std::vector<Vec> found; // converged fixed points within the radius
  std::size_t seeds_tried = 0;
};

inline OrbitSearchResult periodic_orbit_search(const EvolutionProblem& p,
                                               const Vec& center, double radius,
                                               double eps, std::size_t seeds,
                                               std::uint64_t rng_seed,
                                               const PeriodicNewtonOptions& opts = {}) {
  OrbitSearchResult out;
  Rng rng(rng_seed);
  for (std::size_t i = 0; i < seeds; ++i) {
    // uniform sample of the ball
    const Vec u = unit_vector(rng, p.n);
    const double r =
        radius * std::pow(uniform01(rng), 1.0 / double(p.n));
    const Vec seed = center + r * u;
    ++out.seeds_tried;
    PeriodicNewtonResult nr;
    try {
      nr = newton_periodic(p, seed, eps, opts);
    } catch (const FlowError&) {
      continue;
    }
    if (!nr.converged || (nr.xi - center).norm() > radius) continue;
    bool dup = false;
    for (const auto& f : out.found)
      if ((f - nr.xi).norm() <= 1e-6) {
        dup = true;
        break;
      }
    if (!dup) out.found.push_back(nr.xi);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full analysis: assumption checks, zero search, indices, verdicts,
// continuation evidence, necessity cross-check.

enum class Verdict { ExistencePredicted, NoObstruction, AssumptionFailure };

inline const char* verdict_name(Verdict v) {
  switch (v) {
  case Verdict::ExistencePredicted: return "ExistencePredicted";
  case Verdict::NoObstruction: return "NoObstruction";
  case Verdict::AssumptionFailure: return "AssumptionFailure";
  }
  return "unknown";
}

struct ZeroReportEntry {
  Vec h;
  double m_norm = 0.0;
  Mat jacobian; // finite-difference Jacobian of the bifurcation function
  std::optional<DegreeResult> index;
  std::string index_note;
  Verdict verdict = Verdict::NoObstruction;
  std::string note;
};

struct AnalyzeConfig {
  Index grid_resolution = 21;
  IntegratorOptions integrator;
  std::vector<double> epsilon_ladder = default_epsilon_ladder();
  MFirstTerm mode = MFirstTerm::Consistent;
  std::uint64_t seed = 0;
  bool run_continuation = true;
  unsigned threads = 1;
  double necessity_tol = 1e-6;
};

struct BifurcationReport {
  std::string model_name;
  Index n = 0;
  Index k = 0;
  double period = 0.0;
  Vec h0;
  double r0 = 0.0;
  MFirstTerm mode = MFirstTerm::Consistent;
  std::vector<ValidationCheck> assumption_checks;
  bool assumptions_pass = false;
  std::vector<GridSample> m_grid;
  std::size_t grid_failures = 0;
  std::string grid_note;
  std::vector<ZeroReportEntry> zeros;
  std::vector<RejectedCandidate> rejected;
  std::vector<ContinuationRecord> continuations; // per ExistencePredicted zero
  std::vector<NecessityResult> necessity;        // aligned with continuations
  std::string summary; // worst verdict over the run
};

inline BifurcationReport analyze(const EvolutionProblem& p,
                                 const FamilyChart& chart,
                                 const AnalyzeConfig& cfg = {}) {
  check_shapes(p, chart);
  BifurcationReport rep;
  rep.model_name = p.name;
  rep.n = p.n;
  rep.k = chart.k;
  rep.period = p.period;
  rep.h0 = chart.h0;
  rep.r0 = chart.r0;
  rep.mode = cfg.mode;

  ReductionOptions ropts;
  ropts.integrator = cfg.integrator;

  // structural and family assumptions
  ValidateOptions vopts;
  vopts.integrator = cfg.integrator;
  vopts.seed = cfg.seed ^ 0x56c1f0ab3u;
  ValidationSummary vs = validate_problem(p, chart, vopts);
  rep.assumption_checks = vs.checks;

  // projector construction and complement invertibility at the chart center
  {
    ValidationCheck pc{"projector-algebra", 0.0, 1e-10, true, ""};
    ValidationCheck cc{"complement-invertibility", 0.0, 1e-8, true, ""};
    try {
      const ProjectorPair pp = projectors(chart, chart.h0, ropts.rank_rtol);
      const Mat Sp = chart_jacobian(chart, chart.h0);
      double r = (pp.pi1 + pp.pi2 - Mat::Identity(p.n, p.n)).norm();
      r = std::max(r, (pp.pi1 * pp.pi1 - pp.pi1).norm());
      r = std::max(r, (pp.pi1 * pp.pi2).norm());
      r = std::max(r, (pp.pi1 * Sp - Sp).norm() / std::max(1.0, Sp.norm()));
      pc.residual = r;
      pc.pass = r <= pc.threshold;
      if (pp.basis_E2.cols() == 0) {
        cc.note = "trivial complement (family dimension equals state "
                  "dimension)";
        cc.residual = 0.0;
      } else {
        const ComplementOperator co =
            complement_operator(p, chart, chart.h0, ropts);
        cc.residual = ropts.sigma_min_floor - co.sigma_min; // pass iff < 0
        cc.pass = co.sigma_min > ropts.sigma_min_floor;
        cc.note = "sigma_min = " + std::to_string(co.sigma_min) +
                  ", condition = " + std::to_string(co.condition);
        if (co.D.rows() <= 4) {
          cc.note += ", entries:";
          for (Index i = 0; i < co.D.rows(); ++i)
            for (Index j = 0; j < co.D.cols(); ++j)
              cc.note += " " + std::to_string(co.D(i, j));
        }
      }
    } catch (const Error& e) {
      cc.pass = false;
      cc.residual = std::numeric_limits<double>::infinity();
      cc.note = e.what();
    }
    rep.assumption_checks.push_back(pc);
    rep.assumption_checks.push_back(cc);
  }

  rep.assumptions_pass = true;
  for (const auto& c : rep.assumption_checks) rep.assumptions_pass &= c.pass;
  if (!rep.assumptions_pass) {
    rep.summary = verdict_name(Verdict::AssumptionFailure);
    rep.grid_note = "zero search skipped: assumption checks failed";
    return rep;
  }

  // grid search for zeros of the bifurcation function
  const BifurcationFunctionEvaluator eval(p, chart, cfg.mode, ropts);
  ZeroSearchOptions zopts;
  zopts.grid_resolution = cfg.grid_resolution;
  zopts.seed = cfg.seed;
  zopts.threads = cfg.threads;
  const auto M = [&](const Vec& h) { return eval(h); };
  ZeroSearchResult zs = find_zeros(M, chart, zopts);
  rep.m_grid = std::move(zs.grid);
  rep.grid_failures = zs.grid_failures;
  rep.rejected = std::move(zs.rejected);
  rep.grid_note = zs.note;

  if (rep.grid_failures > 0 && rep.m_grid.empty()) {
    rep.summary = verdict_name(Verdict::AssumptionFailure);
    rep.grid_note = "bifurcation function unavailable on the whole grid: " +
                    zs.first_grid_failure;
    return rep;
  }
  if (rep.grid_failures > 0) {
    rep.grid_note += (rep.grid_note.empty() ? "" : "; ") +
                     std::to_string(rep.grid_failures) +
                     " grid points failed: " + zs.first_grid_failure;
  }

  // indices and verdicts
  bool any_assumption_failure = rep.grid_failures > rep.m_grid.size();
  for (const auto& cand : zs.zeros) {
    ZeroReportEntry z;
    z.h = cand.h;
    z.m_norm = cand.residual;
    try {
      z.jacobian = fd_jacobian(M, cand.h);
      IsolationOptions iso; // isolation already established by find_zeros
      iso.min_norm = 0.0;
      z.index = index_of_zero(M, cand.h, zs.isolation_radius, z.jacobian, iso);
      z.verdict = (z.index->value != 0 && z.index->certified)
                      ? Verdict::ExistencePredicted
                      : Verdict::NoObstruction;
      if (z.index->value != 0 && !z.index->certified) {
        z.note = "index computation hit its refinement cap; treating the "
                 "index as inconclusive";
      }
    } catch (const DegreeError& e) {
      z.verdict = Verdict::NoObstruction;
      z.index_note = e.what();
    } catch (const AssumptionError& e) {
      z.verdict = Verdict::AssumptionFailure;
      z.index_note = e.what();
      any_assumption_failure = true;
    }
    rep.zeros.push_back(std::move(z));
  }

  // continuation evidence for predicted zeros
  if (cfg.run_continuation) {
    ContinuationOptions copts;
    copts.reduction = ropts;
    copts.newton.integrator = cfg.integrator;
    for (const auto& z : rep.zeros) {
      if (z.verdict != Verdict::ExistencePredicted) continue;
      ContinuationRecord rec =
          continue_periodic(p, chart, z.h, cfg.epsilon_ladder, copts);
      std::vector<std::pair<double, Vec>> observed;
      for (const auto& e : rec.entries)
        if (e.converged) observed.push_back({e.eps, e.xi});
      NecessityResult nec;
      if (observed.size() >= 2) {
        NecessityOptions nopts;
        nopts.reduction = ropts;
        nopts.mode = cfg.mode;
        nopts.tol = cfg.necessity_tol;
        try {
          nec = necessity_check(p, chart, observed, nopts);
        } catch (const Error& e) {
          nec.pass = false;
          nec.note = e.what();
        }
      } else {
        nec.pass = false;
        nec.note = "not enough converged continuation entries for the "
                   "necessity check";
      }
      rep.continuations.push_back(std::move(rec));
      rep.necessity.push_back(std::move(nec));
    }
  }

  Verdict worst = Verdict::NoObstruction;
  for (const auto& z : rep.zeros)
    if (z.verdict == Verdict::ExistencePredicted)
      worst = Verdict::ExistencePredicted;
  if (any_assumption_failure) worst = Verdict::AssumptionFailure;
  for (const auto& z : rep.zeros)
    if (z.verdict == Verdict::AssumptionFailure)
      worst = Verdict::AssumptionFailure;
  rep.summary = verdict_name(worst);
  return rep;
}

} // namespace bifkit
