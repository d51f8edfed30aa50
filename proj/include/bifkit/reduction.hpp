#pragma once

#include "bifkit/flow.hpp"
#include "bifkit/model.hpp"

namespace bifkit {

// ---------------------------------------------------------------------------
// Splitting of the state space along the family.  E1(h) = range S'(h) carries
// the tangent directions of the candidate family; E2(h) is its Euclidean
// orthogonal complement, so the continuity requirement on the projectors
// holds by construction wherever the rank does not drop.

struct ProjectorPair {
  Vec h;
  Mat basis_E1; // n x k, orthonormal columns spanning range S'(h)
  Mat basis_E2; // n x (n-k), orthonormal complement
  Mat pi1;      // orthogonal projector onto E1
  Mat pi2;      // I - pi1
};

struct ReductionOptions {
  IntegratorOptions integrator;
  double rank_rtol = 1e-8;       // family-rank relative threshold
  double sigma_min_floor = 1e-8; // complement-operator invertibility floor
  double beta_tol_scale = 1e-11; // tol = scale * (1 + |S(h)|)
  std::size_t beta_max_iter = 50;
};

inline ProjectorPair projectors(const FamilyChart& chart, const Vec& h,
                                double rank_rtol = 1e-8) {
  const Mat Sp = chart_jacobian(chart, h);
  const Index n = Sp.rows(), k = Sp.cols();
  Eigen::JacobiSVD<Mat> svd(Sp, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  if (sv.size() < k || sv[k - 1] <= rank_rtol * sv[0])
    throw AssumptionError(
        "family-rank",
        "family derivative loses rank at the requested chart point (sigma_k/"
        "sigma_1 = " +
            std::to_string(sv.size() ? sv[sv.size() - 1] / sv[0] : 0.0) + ")");
  ProjectorPair pp;
  pp.h = h;
  pp.basis_E1 = svd.matrixU().leftCols(k);
  pp.basis_E2 = svd.matrixU().rightCols(n - k);
  pp.pi1 = pp.basis_E1 * pp.basis_E1.transpose();
  pp.pi2 = Mat::Identity(n, n) - pp.pi1;
  return pp;
}

// ---------------------------------------------------------------------------
// Complement operator D = B2^T (P_0'(S(h)) - I) B2 in the orthonormal
// complement coordinates.  Invertibility of D is the hypothesis that lets the
// complement direction be solved away; k = n gives the empty operator, which
// is trivially invertible.

struct ComplementOperator {
  Mat D;                     // (n-k) x (n-k)
  double condition = 1.0;    // sigma_max / sigma_min (1 when empty)
  double sigma_min = std::numeric_limits<double>::infinity();
};

inline ComplementOperator
complement_operator_from(const Mat& monodromy, const ProjectorPair& pp,
                         double sigma_min_floor = 1e-8) {
  ComplementOperator co;
  const Index m = pp.basis_E2.cols();
  co.D = pp.basis_E2.transpose() *
         (monodromy - Mat::Identity(monodromy.rows(), monodromy.cols())) *
         pp.basis_E2;
  if (m == 0) return co;
  Eigen::JacobiSVD<Mat> svd(co.D);
  const auto& sv = svd.singularValues();
  co.sigma_min = sv[m - 1];
  co.condition = (co.sigma_min > 0.0)
                     ? sv[0] / co.sigma_min
                     : std::numeric_limits<double>::infinity();
  if (co.sigma_min <= sigma_min_floor)
    throw AssumptionError(
        "complement-invertibility",
        "complement operator is numerically singular (sigma_min = " +
            std::to_string(co.sigma_min) + ", condition = " +
            std::to_string(co.condition) + ")");
  return co;
}

inline ComplementOperator complement_operator(const EvolutionProblem& p,
                                              const FamilyChart& chart,
                                              const Vec& h,
                                              const ReductionOptions& opts = {}) {
  check_shapes(p, chart);
  const ProjectorPair pp = projectors(chart, h, opts.rank_rtol);
  const MonodromyData md =
      monodromy_and_response(p, chart.S(h), opts.integrator);
  return complement_operator_from(md.monodromy, pp, opts.sigma_min_floor);
}

// ---------------------------------------------------------------------------
// Complement correction beta(h, eps): the unique small fixed point of the
// projected displacement in S(h) + E2(h).  Solved by a chord Newton whose
// frozen matrix is the complement operator; for small eps the iteration is a
// contraction and a handful of Poincare evaluations suffice.

struct BetaSolution {
  Vec beta;        // element of E2(h), embedded in R^n
  Vec limit_check; // -B2 D^{-1} B2^T q(S(h)); beta/eps approaches this
  std::size_t iterations = 0;
  double residual = 0.0; // |projected displacement| at the accepted beta
};

inline BetaSolution solve_beta(const EvolutionProblem& p,
                               const FamilyChart& chart, const Vec& h,
                               double eps, const ReductionOptions& opts = {}) {
  check_shapes(p, chart);
  if (eps < 0.0) throw DomainError("solve_beta requires eps >= 0");
  const ProjectorPair pp = projectors(chart, h, opts.rank_rtol);
  const Vec s = chart.S(h);

  const Index m = pp.basis_E2.cols();
  BetaSolution out;
  if (m == 0) {
    out.beta = Vec::Zero(p.n);
    out.limit_check = Vec::Zero(p.n);
    out.residual = 0.0;
    return out; // the complement is trivial; nothing to correct
  }

  const MonodromyData md = monodromy_and_response(p, s, opts.integrator);
  const ComplementOperator co =
      complement_operator_from(md.monodromy, pp, opts.sigma_min_floor);

  const Eigen::PartialPivLU<Mat> Dlu(co.D);
  out.limit_check =
      pp.basis_E2 * Vec(-Dlu.solve(pp.basis_E2.transpose() * md.response));

  Vec w = Vec::Zero(m);
  if (eps == 0.0) {
    // The family point itself is the fixed point.
    out.beta = Vec::Zero(p.n);
    out.residual =
        (pp.basis_E2.transpose() * (md.orbit.terminal() - s)).norm();
    return out;
  }

  const double tol = opts.beta_tol_scale * (1.0 + s.norm());
  const auto projected_displacement = [&](const Vec& wv) {
    const Vec xi = s + pp.basis_E2 * wv;
    return Vec(pp.basis_E2.transpose() *
               (poincare(p, xi, eps, opts.integrator) - xi));
  };
  Vec val = projected_displacement(w);
  for (std::size_t it = 1; it <= opts.beta_max_iter; ++it) {
    const Vec step = Dlu.solve(val);
    w -= step;
    val = projected_displacement(w);
    out.iterations = it;
    if (step.norm() <= tol) {
      out.beta = pp.basis_E2 * w;
      out.residual = val.norm();
      return out;
    }
  }
  throw ConvergenceError(
      "complement correction did not converge: eps is too large for the "
      "contraction regime at this chart point");
}

// ---------------------------------------------------------------------------
// Reduced displacement along the family: the k-vector r(h, eps) solving
//   S'(h) r = pi1 [ P_eps(S(h) + beta) - (S(h) + beta) ],
// i.e. the family-direction component of the displacement at the corrected
// point, in chart coordinates.  Dividing by eps yields the finite-eps
// bifurcation function.

inline Vec reduced_map(const EvolutionProblem& p, const FamilyChart& chart,
                       const Vec& h, double eps,
                       const ReductionOptions& opts = {}) {
  const BetaSolution bs = solve_beta(p, chart, h, eps, opts);
  const ProjectorPair pp = projectors(chart, h, opts.rank_rtol);
  const Vec xi = chart.S(h) + bs.beta;
  const Vec d = displacement(p, xi, eps, opts.integrator);
  const Mat Sp = chart_jacobian(chart, h);
  return Eigen::ColPivHouseholderQR<Mat>(Sp).solve(pp.pi1 * d);
}

inline Vec bifurcation_function_eps(const EvolutionProblem& p,
                                    const FamilyChart& chart, const Vec& h,
                                    double eps,
                                    const ReductionOptions& opts = {}) {
  if (eps <= 0.0)
    throw DomainError("finite-eps bifurcation function requires eps > 0");
  return reduced_map(p, chart, h, eps, opts) / eps;
}

// ---------------------------------------------------------------------------
// Leading-order bifurcation function.  Writing q(x) for the first-order
// response and P' for the unperturbed monodromy at S(h),
//
//   M(h) = S'(h)^+ pi1 [ q(S(.)) - (P' - I) B2 D^{-1} B2^T q(S(h)) ],
//
// the zeros of M are the candidate chart points: a nonzero-index isolated
// zero forces a genuine periodic orbit nearby, and every surviving orbit
// family converges into a zero.  Two conventions are implemented for the
// argument of the first q: 'consistent' evaluates it at the current chart
// point (the limit of the finite-eps function), 'literal' freezes it at the
// chart center.  They agree at h = h0.

enum class MFirstTerm {
  Consistent, // q(S(h), 0)
  Literal,    // q(S(h0), 0)
};

inline Vec bifurcation_function(const EvolutionProblem& p,
                                const FamilyChart& chart, const Vec& h,
                                MFirstTerm mode = MFirstTerm::Consistent,
                                const ReductionOptions& opts = {},
                                const Vec* response_at_center = nullptr) {
  check_shapes(p, chart);
  const ProjectorPair pp = projectors(chart, h, opts.rank_rtol);
  const MonodromyData md =
      monodromy_and_response(p, chart.S(h), opts.integrator);

  Vec first = md.response;
  if (mode == MFirstTerm::Literal) {
    if (response_at_center) {
      first = *response_at_center;
    } else {
      first =
          monodromy_and_response(p, chart.S(chart.h0), opts.integrator).response;
    }
  }

  Vec v = first;
  if (pp.basis_E2.cols() > 0) {
    const ComplementOperator co =
        complement_operator_from(md.monodromy, pp, opts.sigma_min_floor);
    const Vec w = Eigen::PartialPivLU<Mat>(co.D).solve(
        pp.basis_E2.transpose() * md.response);
    v -= (md.monodromy - Mat::Identity(p.n, p.n)) * (pp.basis_E2 * w);
  }
  const Mat Sp = chart_jacobian(chart, h);
  return Eigen::ColPivHouseholderQR<Mat>(Sp).solve(pp.pi1 * v);
}

// Reusable evaluator: caches the chart-center response for the literal mode
// so grid sweeps cost one augmented integration per point.
class BifurcationFunctionEvaluator {
public:
  BifurcationFunctionEvaluator(const EvolutionProblem& p,
                               const FamilyChart& chart, MFirstTerm mode,
                               ReductionOptions opts = {})
      : p_(&p), chart_(&chart), mode_(mode), opts_(std::move(opts)) {
    if (mode_ == MFirstTerm::Literal)
      center_response_ =
          monodromy_and_response(p, chart.S(chart.h0), opts_.integrator)
              .response;
  }

  Vec operator()(const Vec& h) const {
    return bifurcation_function(
        *p_, *chart_, h, mode_, opts_,
        mode_ == MFirstTerm::Literal ? &center_response_ : nullptr);
  }

  MFirstTerm mode() const { return mode_; }
  const ReductionOptions& options() const { return opts_; }

private:
  const EvolutionProblem* p_;
  const FamilyChart* chart_;
  MFirstTerm mode_;
  ReductionOptions opts_;
  Vec center_response_;
};

} // namespace bifkit
