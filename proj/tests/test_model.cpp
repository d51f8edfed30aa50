#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <set>

#include "bifkit/registry.hpp"
#include "bifkit/validate.hpp"

namespace {

using bifkit::EvolutionProblem;
using bifkit::FamilyChart;
using bifkit::Mat;
using bifkit::SpectralBlock;
using bifkit::Vec;

constexpr double pi = std::numbers::pi;

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Drift blkdiag(rotation, -1) with smooth part (0, 0, x3^2).  The plane
// x3 = 0 consists of initial points of 2 pi periodic solutions, so the
// validation battery has something honest to certify.
EvolutionProblem cubic_center(bool good_jacobian) {
  EvolutionProblem p;
  p.n = 3;
  p.period = 2.0 * pi;
  p.spectral = {SpectralBlock::rotation(1.0), SpectralBlock::scalar(-1.0)};
  p.A = bifkit::spectral_matrix(p.spectral);
  p.f = [](double, const Vec& x) {
    Vec out = Vec::Zero(3);
    out[2] = x[2] * x[2];
    return out;
  };
  const double bias = good_jacobian ? 0.0 : 0.4;
  p.f_x = [bias](double, const Vec& x) {
    Mat J = Mat::Zero(3, 3);
    J(2, 2) = 2.0 * x[2] + bias;
    return J;
  };
  p.g = [](double t, const Vec&, double) {
    Vec out = Vec::Zero(3);
    out[2] = std::cos(t);
    return out;
  };
  p.name = "cubic-center";
  return p;
}

FamilyChart plane_chart() {
  FamilyChart chart;
  chart.k = 2;
  chart.h0 = Vec::Zero(2);
  chart.r0 = 1.0;
  chart.S = [](const Vec& h) {
    Vec x = Vec::Zero(3);
    x[0] = h[0];
    x[1] = h[1];
    return x;
  };
  chart.S_prime = [](const Vec&) {
    Mat J = Mat::Zero(3, 2);
    J(0, 0) = 1.0;
    J(1, 1) = 1.0;
    return J;
  };
  return chart;
}

} // namespace

TEST_CASE("registry lists four models and validates each") {
  const auto& entries = bifkit::registry_list();
  REQUIRE(entries.size() == 4);
  std::set<std::string> names;
  for (const auto& e : entries) {
    names.insert(e.name);
    REQUIRE_FALSE(e.summary.empty());
  }
  REQUIRE(names == std::set<std::string>{"harmonic_forced",
                                         "center_contraction", "forced_vdp",
                                         "galerkin_heat_osc"});
  for (const auto& e : entries) {
    auto bundle = bifkit::registry_get(e.name);
    const auto summary =
        bifkit::validate_problem(bundle.problem, bundle.chart);
    INFO(e.name);
    for (const auto& c : summary.checks) {
      INFO(c.name << " residual " << c.residual << " threshold "
                  << c.threshold);
      CHECK(c.pass);
    }
    REQUIRE(summary.pass);
  }
}

TEST_CASE("registry rejects unknown names and parameters") {
  try {
    bifkit::registry_get("no_such_model");
    FAIL("expected a config error");
  } catch (const bifkit::ConfigError& e) {
    REQUIRE(std::string(e.what()).find("available:") != std::string::npos);
  }
  try {
    bifkit::registry_get("harmonic_forced", {{"zeta", 1.0}});
    FAIL("expected a config error");
  } catch (const bifkit::ConfigError& e) {
    REQUIRE(std::string(e.what()).find("lambda") != std::string::npos);
  }
}

TEST_CASE("parameter overrides reach the vector fields") {
  auto bundle = bifkit::registry_get("harmonic_forced", {{"lambda", 2.5}});
  REQUIRE(bundle.params.at("lambda") == 2.5);
  // The explicit periodic solution moves to (0, lambda).
  bifkit::IntegratorOptions tight;
  tight.abs_tol = 1e-12;
  tight.rel_tol = 1e-11;
  REQUIRE(bifkit::displacement(bundle.problem, v2(0.0, 2.5), 0.2, tight)
              .norm() < 1e-9);

  auto cc = bifkit::registry_get("center_contraction", {{"gamma", 2.0}});
  REQUIRE(cc.problem.spectral.size() == 2);
  REQUIRE(cc.problem.spectral[1].value == -2.0);
}

TEST_CASE("galerkin model shape follows its mode count") {
  auto bundle = bifkit::registry_get("galerkin_heat_osc", {{"N", 3.0}});
  const EvolutionProblem& p = bundle.problem;
  REQUIRE(p.n == 5);
  REQUIRE(p.spectral.size() == 4);
  REQUIRE(p.spectral[0].kind == SpectralBlock::Kind::Rotation);
  REQUIRE(p.spectral[1].value == -1.0);
  REQUIRE(p.spectral[2].value == -4.0);
  REQUIRE(p.spectral[3].value == -9.0);
  REQUIRE((p.A - bifkit::spectral_matrix(p.spectral)).norm() == 0.0);
  REQUIRE(p.semigroup == bifkit::SemigroupClass::AnalyticCompact);
  REQUIRE(bundle.chart.k == 2);

  REQUIRE_THROWS_AS(bifkit::registry_get("galerkin_heat_osc", {{"N", 2.5}}),
                    bifkit::ConfigError);
  REQUIRE_THROWS_AS(bifkit::registry_get("galerkin_heat_osc", {{"N", 0.0}}),
                    bifkit::ConfigError);
}

TEST_CASE("center contraction chart embeds the plane") {
  auto bundle = bifkit::registry_get("center_contraction");
  REQUIRE(bundle.chart.k == 2);
  Mat want = Mat::Zero(3, 2);
  want(0, 0) = 1.0;
  want(1, 1) = 1.0;
  REQUIRE(
      (bifkit::chart_jacobian(bundle.chart, bundle.chart.h0) - want).norm() <
      1e-9);
}

TEST_CASE("a wrong period breaks the fixed point identity") {
  auto bundle = bifkit::registry_get("harmonic_forced");
  bundle.problem.period = pi;
  const auto summary =
      bifkit::validate_problem(bundle.problem, bundle.chart);
  const auto* c = summary.find("family-fixed-point");
  REQUIRE(c != nullptr);
  REQUIRE_FALSE(c->pass);
  REQUIRE_FALSE(summary.pass);
}

TEST_CASE("jacobian checks compare against finite differences") {
  const auto good = bifkit::validate_problem(cubic_center(true), plane_chart());
  REQUIRE(good.pass);
  const auto* jc = good.find("smooth-jacobian");
  REQUIRE(jc != nullptr);
  REQUIRE(jc->pass);

  const auto bad = bifkit::validate_problem(cubic_center(false), plane_chart());
  const auto* bj = bad.find("smooth-jacobian");
  REQUIRE(bj != nullptr);
  REQUIRE_FALSE(bj->pass);

  FamilyChart warped = plane_chart();
  warped.S_prime = [](const Vec&) {
    Mat J = Mat::Zero(3, 2);
    J(0, 0) = 1.1;
    J(1, 1) = 1.0;
    return J;
  };
  const auto chart_bad = bifkit::validate_problem(cubic_center(true), warped);
  const auto* cj = chart_bad.find("chart-jacobian");
  REQUIRE(cj != nullptr);
  REQUIRE_FALSE(cj->pass);
}

TEST_CASE("rank deficient charts are flagged") {
  FamilyChart folded = plane_chart();
  folded.S = [](const Vec& h) {
    Vec x = Vec::Zero(3);
    x[0] = h[0] + h[1];
    x[1] = h[0] + h[1];
    return x;
  };
  folded.S_prime = {};
  const auto summary =
      bifkit::validate_problem(cubic_center(true), folded);
  const auto* c = summary.find("family-rank");
  REQUIRE(c != nullptr);
  REQUIRE_FALSE(c->pass);
}

TEST_CASE("declared contraction rates are checked against the drift") {
  EvolutionProblem p;
  p.n = 2;
  p.period = 1.0;
  p.spectral = {SpectralBlock::scalar(-1.0), SpectralBlock::scalar(-2.0)};
  p.A = bifkit::spectral_matrix(p.spectral);
  p.semigroup = bifkit::SemigroupClass::ContractiveC0;
  FamilyChart origin;
  origin.k = 1;
  origin.h0 = Vec::Zero(1);
  origin.r0 = 1.0;
  origin.S = [](const Vec&) { return Vec(Vec::Zero(2)); };

  p.decay_rate = 0.5;
  const auto ok = bifkit::validate_problem(p, origin);
  const auto* c = ok.find("drift-contractivity");
  REQUIRE(c != nullptr);
  REQUIRE(c->pass);

  p.decay_rate = 1.5;
  const auto bad = bifkit::validate_problem(p, origin);
  const auto* b = bad.find("drift-contractivity");
  REQUIRE(b != nullptr);
  REQUIRE_FALSE(b->pass);
}

TEST_CASE("declared block structure must match the drift matrix") {
  EvolutionProblem p;
  p.n = 2;
  p.period = 1.0;
  p.spectral = {SpectralBlock::scalar(-1.0), SpectralBlock::scalar(-2.0)};
  p.A = bifkit::spectral_matrix(p.spectral);
  p.A(1, 1) = -2.5;
  FamilyChart origin;
  origin.k = 1;
  origin.h0 = Vec::Zero(1);
  origin.r0 = 1.0;
  origin.S = [](const Vec&) { return Vec(Vec::Zero(2)); };
  const auto summary = bifkit::validate_problem(p, origin);
  const auto* c = summary.find("drift-structure");
  REQUIRE(c != nullptr);
  REQUIRE_FALSE(c->pass);
}

TEST_CASE("aperiodic forcing is flagged") {
  EvolutionProblem p;
  p.n = 1;
  p.period = 1.0;
  p.spectral = {SpectralBlock::scalar(-1.0)};
  p.A = bifkit::spectral_matrix(p.spectral);
  p.g = [](double t, const Vec&, double) {
    return Vec(Vec::Constant(1, std::cos(0.5 * t)));
  };
  FamilyChart origin;
  origin.k = 1;
  origin.h0 = Vec::Zero(1);
  origin.r0 = 1.0;
  origin.S = [](const Vec&) { return Vec(Vec::Zero(1)); };
  const auto summary = bifkit::validate_problem(p, origin);
  const auto* c = summary.find("field-periodicity");
  REQUIRE(c != nullptr);
  REQUIRE_FALSE(c->pass);
}

TEST_CASE("latin hypercube sampling is deterministic and stays in the ball") {
  auto bundle = bifkit::registry_get("harmonic_forced");
  bifkit::Rng a(42), b(42), c(43);
  const auto pa = bifkit::latin_hypercube_ball(bundle.chart, 16, a);
  const auto pb = bifkit::latin_hypercube_ball(bundle.chart, 16, b);
  const auto pc = bifkit::latin_hypercube_ball(bundle.chart, 16, c);
  REQUIRE(pa.size() == 16);
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE((pa[i] - pb[i]).norm() == 0.0);
    differs = differs || (pa[i] - pc[i]).norm() > 0.0;
    REQUIRE((pa[i] - bundle.chart.h0).norm() <= bundle.chart.r0 + 1e-12);
  }
  REQUIRE(differs);
}

TEST_CASE("finite difference jacobians are accurate") {
  const auto F = [](const Vec& x) {
    Vec out(2);
    out[0] = x[0] * x[0] + x[1];
    out[1] = std::sin(x[1]);
    return out;
  };
  Vec x = v2(0.7, -0.3);
  const Mat J = bifkit::fd_jacobian(F, x);
  Mat want(2, 2);
  want << 1.4, 1.0, 0.0, std::cos(-0.3);
  REQUIRE((J - want).norm() < 1e-7);
}

TEST_CASE("shape validation rejects malformed problems") {
  EvolutionProblem p;
  p.n = 2;
  p.period = 1.0;
  p.A = Mat::Zero(1, 1);
  REQUIRE_THROWS_AS(bifkit::check_shapes(p), bifkit::ConfigError);
  p.A = Mat::Zero(2, 2);
  p.spectral = {SpectralBlock::scalar(-1.0)};
  REQUIRE_THROWS_AS(bifkit::check_shapes(p), bifkit::ConfigError);
  p.spectral.clear();

  FamilyChart chart;
  chart.k = 3;
  chart.h0 = Vec::Zero(3);
  chart.r0 = 1.0;
  chart.S = [](const Vec&) { return Vec(Vec::Zero(2)); };
  REQUIRE_THROWS_AS(bifkit::check_shapes(p, chart), bifkit::ConfigError);
  chart.k = 1;
  chart.h0 = Vec::Zero(1);
  chart.r0 = -1.0;
  REQUIRE_THROWS_AS(bifkit::check_shapes(p, chart), bifkit::ConfigError);
  chart.r0 = 1.0;
  chart.S = {};
  REQUIRE_THROWS_AS(bifkit::check_shapes(p, chart), bifkit::ConfigError);
}
