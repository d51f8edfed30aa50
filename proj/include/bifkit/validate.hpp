#pragma once

#include <numeric>

#include "bifkit/flow.hpp"
#include "bifkit/model.hpp"

namespace bifkit {

struct ValidationCheck {
  std::string name;
  double residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string note;
};

struct ValidationSummary {
  std::vector<ValidationCheck> checks;
  bool pass = true;

  const ValidationCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

struct ValidateOptions {
  std::size_t samples = 12;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;
  IntegratorOptions integrator;
  // Fixed-point residual budget: factor * (abs_tol + rel_tol * (1 + |S(h)|)).
  double fixed_point_factor = 1e3;
  double jacobian_rtol = 1e-5;
  double rank_rtol = 1e-8;
};

// Latin-hypercube sample of the chart ball (points live in the inscribed
// cube, so membership is guaranteed).  Deterministic for a fixed seed.
inline std::vector<Vec> latin_hypercube_ball(const FamilyChart& chart,
                                             std::size_t count, Rng& rng) {
  const Index k = chart.k;
  const double half = chart.r0 / std::sqrt(static_cast<double>(k));
  std::vector<std::vector<std::size_t>> perm(
      static_cast<std::size_t>(k), std::vector<std::size_t>(count));
  for (auto& axis : perm) {
    std::iota(axis.begin(), axis.end(), std::size_t{0});
    for (std::size_t i = count; i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * double(i));
      std::swap(axis[i - 1], axis[std::min(j, i - 1)]);
    }
  }
  std::vector<Vec> pts;
  pts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec h(k);
    for (Index d = 0; d < k; ++d) {
      const double cell =
          (double(perm[static_cast<std::size_t>(d)][i]) + uniform01(rng)) /
          double(count);
      h[d] = chart.h0[d] + half * (2.0 * cell - 1.0);
    }
    pts.push_back(h);
  }
  return pts;
}

// Structural spot-checks: time periodicity of the fields, consistency of the
// supplied Jacobians with finite differences, the fixed-point identity
// P_0(S(h)) = S(h) across the chart, and full rank of S'(h0).
inline ValidationSummary validate_problem(const EvolutionProblem& p,
                                          const FamilyChart& chart,
                                          const ValidateOptions& opts = {}) {
  check_shapes(p, chart);
  ValidationSummary out;
  Rng rng(opts.seed);
  const auto sample_points = latin_hypercube_ball(chart, opts.samples, rng);

  auto push = [&out](ValidationCheck c) {
    c.pass = c.residual <= c.threshold;
    out.pass = out.pass && c.pass;
    out.checks.push_back(std::move(c));
  };

  // Drift structure, when declared.
  if (!p.spectral.empty()) {
    ValidationCheck c{"drift-structure"};
    c.residual = (p.A - spectral_matrix(p.spectral)).norm();
    c.threshold = 1e-12 * (1.0 + p.A.norm());
    push(std::move(c));
  }

  // Contractivity metadata: matrix measure mu(A) <= -gamma.
  if (p.semigroup == SemigroupClass::ContractiveC0 && p.decay_rate) {
    ValidationCheck c{"drift-contractivity"};
    const Mat sym = 0.5 * (p.A + p.A.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    c.residual = es.eigenvalues().maxCoeff() + *p.decay_rate;
    c.threshold = 1e-10 * (1.0 + p.A.norm());
    push(std::move(c));
  }

  // Time periodicity of f and g at scattered states.
  {
    ValidationCheck c{"field-periodicity"};
    double worst = 0.0;
    for (std::size_t i = 0; i < opts.samples; ++i) {
      const Vec h = sample_points[i % sample_points.size()];
      Vec x = chart.S(h);
      for (Index d = 0; d < p.n; ++d)
        x[d] += 0.1 * chart.r0 * (2.0 * uniform01(rng) - 1.0);
      const double t = p.period * uniform01(rng);
      if (p.f) worst = std::max(worst, (p.f(t + p.period, x) - p.f(t, x)).norm());
      if (p.g) {
        for (double eps : {0.0, 1e-2})
          worst = std::max(
              worst, (p.g(t + p.period, x, eps) - p.g(t, x, eps)).norm());
      }
    }
    c.residual = worst;
    c.threshold = 1e-9;
    push(std::move(c));
  }

  // Supplied f Jacobian against central differences.
  {
    ValidationCheck c{"smooth-jacobian"};
    if (p.f && p.f_x) {
      double worst = 0.0;
      for (std::size_t i = 0; i < std::min<std::size_t>(opts.samples, 8); ++i) {
        const Vec h = sample_points[i % sample_points.size()];
        Vec x = chart.S(h);
        for (Index d = 0; d < p.n; ++d)
          x[d] += 0.1 * chart.r0 * (2.0 * uniform01(rng) - 1.0);
        const double t = p.period * uniform01(rng);
        const Mat J = p.f_x(t, x);
        const Mat Jfd =
            fd_jacobian([&](const Vec& y) { return p.f(t, y); }, x);
        worst = std::max(worst, (J - Jfd).norm() / std::max(1.0, J.norm()));
      }
      c.residual = worst;
    } else {
      c.note = p.f ? "Jacobian synthesized by differences" : "no smooth part";
    }
    c.threshold = opts.jacobian_rtol;
    push(std::move(c));
  }

  // Supplied chart Jacobian against central differences.
  if (chart.S_prime) {
    ValidationCheck c{"chart-jacobian"};
    double worst = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(opts.samples, 8); ++i) {
      const Vec& h = sample_points[i % sample_points.size()];
      const Mat J = chart.S_prime(h);
      const Mat Jfd = fd_jacobian(chart.S, h);
      worst = std::max(worst, (J - Jfd).norm() / std::max(1.0, J.norm()));
    }
    c.residual = worst;
    c.threshold = opts.jacobian_rtol;
    push(std::move(c));
  }

  // Fixed-point identity across the chart ball.
  {
    ValidationCheck c{"family-fixed-point"};
    double worst = 0.0, scale = 1.0;
    try {
      for (const Vec& h : sample_points) {
        const Vec s = chart.S(h);
        scale = std::max(scale, s.norm());
        worst = std::max(
            worst, (poincare(p, s, 0.0, opts.integrator) - s).norm());
      }
      c.residual = worst;
    } catch (const FlowError& e) {
      c.residual = std::numeric_limits<double>::infinity();
      c.note = std::string("unperturbed flow diverged: ") + e.what();
    }
    c.threshold = opts.fixed_point_factor *
                  (opts.integrator.abs_tol +
                   opts.integrator.rel_tol * (1.0 + scale));
    push(std::move(c));
  }

  // Rank of the family derivative at the chart center.
  {
    ValidationCheck c{"family-rank"};
    const Mat Sp = chart_jacobian(chart, chart.h0);
    Eigen::JacobiSVD<Mat> svd(Sp);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
    // Pass iff sigma_k > rank_rtol * sigma_1; expressed as a residual.
    c.residual = (smax > 0.0) ? opts.rank_rtol - smin / smax : 1.0;
    c.threshold = 0.0;
    c.note = "sigma_min/sigma_max = " +
             std::to_string(smax > 0.0 ? smin / smax : 0.0);
    push(std::move(c));
  }

  return out;
}

} // namespace bifkit
