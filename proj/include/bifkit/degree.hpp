#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "bifkit/types.hpp"

namespace bifkit {

// Topological index of an isolated zero of a map R^k -> R^k, computed as the
// Brouwer degree on a small ball around it.  Nondegenerate zeros use the
// Jacobian sign; degenerate planar zeros fall back to the winding number of
// the boundary image, degenerate 1d zeros to boundary signs.  Degenerate
// zeros in dimension three and above are rejected rather than guessed.

using MapFn = std::function<Vec(const Vec&)>;
using ScalarFn = std::function<double(double)>;

enum class DegreeMethod { JacobianSign, SignChange1D, Winding2D };

struct DegreeResult {
  int value = 0;
  DegreeMethod method = DegreeMethod::JacobianSign;
  bool certified = true;        // false if boundary refinement hit its cap
  std::size_t samples_used = 0; // boundary evaluations (winding only)
};

inline const char* degree_method_name(DegreeMethod m) {
  switch (m) {
  case DegreeMethod::JacobianSign: return "jacobian-sign";
  case DegreeMethod::SignChange1D: return "sign-change-1d";
  case DegreeMethod::Winding2D: return "winding-2d";
  }
  return "unknown";
}

// Index of a nondegenerate zero from its Jacobian.  The rank test is
// relative: the smallest singular value must clear sigma_rtol times the
// largest, so integrator noise on an O(1) Jacobian cannot flip the verdict.
inline DegreeResult index_nondegenerate(const Mat& J, double sigma_rtol = 1e-8) {
  const Index k = J.rows();
  Eigen::JacobiSVD<Mat> svd(J);
  const auto& sv = svd.singularValues();
  if (!(sv[k - 1] > sigma_rtol * sv[0]))
    throw DegreeError("Jacobian is numerically singular (sigma_min/sigma_max "
                      "= " +
                      std::to_string(sv[0] > 0 ? sv[k - 1] / sv[0] : 0.0) +
                      "); use the boundary-degree path");
  DegreeResult r;
  r.method = DegreeMethod::JacobianSign;
  r.value = J.determinant() > 0.0 ? 1 : -1;
  return r;
}

inline DegreeResult degree_1d(const ScalarFn& f, double a, double b) {
  const double fa = f(a), fb = f(b);
  if (fa == 0.0 || fb == 0.0)
    throw DegreeError("map vanishes at an interval endpoint; degree "
                      "undefined on this interval");
  DegreeResult r;
  r.method = DegreeMethod::SignChange1D;
  r.samples_used = 2;
  const int sa = fa > 0.0 ? 1 : -1, sb = fb > 0.0 ? 1 : -1;
  r.value = (sb - sa) / 2;
  return r;
}

// Winding number of the image of a closed polygonal boundary.  Vertices are
// listed once (the closing edge back to vertices[0] is implicit).  Each edge
// is refined by midpoint subdivision until consecutive image points turn by
// at most pi/2, so the angle increments can be summed without unwrapping
// ambiguity; the sample cap keeps boundary zeros from stalling refinement.
inline DegreeResult degree_2d(const MapFn& F, const std::vector<Vec>& vertices,
                              std::size_t max_samples = (std::size_t{1} << 20)) {
  if (vertices.size() < 3)
    throw DegreeError("polygon boundary needs at least three vertices");
  DegreeResult r;
  r.method = DegreeMethod::Winding2D;

  const auto image = [&](const Vec& x) {
    const Vec y = F(x);
    ++r.samples_used;
    if (y.norm() == 0.0)
      throw DegreeError("map vanishes on the boundary; degree undefined");
    return y;
  };
  const auto turn = [](const Vec& a, const Vec& b) {
    // signed angle from a to b, in (-pi, pi]
    return std::atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]);
  };

  constexpr double half_pi = 1.5707963267948966;
  constexpr double two_pi = 6.283185307179586476925286766559;

  struct Node {
    Vec x;
    Vec y;
  };
  double total = 0.0;
  const std::size_t m = vertices.size();
  Node first{vertices[0], image(vertices[0])};
  Node a = first;
  for (std::size_t i = 1; i <= m; ++i) {
    Node b = (i == m) ? first : Node{vertices[i], image(vertices[i])};
    std::vector<Node> stack{b};
    while (!stack.empty()) {
      const Node top = stack.back();
      const double dphi = turn(a.y, top.y);
      const bool resolved = std::abs(dphi) <= half_pi;
      if (resolved || r.samples_used >= max_samples) {
        if (!resolved) r.certified = false;
        total += dphi;
        a = top;
        stack.pop_back();
      } else {
        Vec xm = 0.5 * (a.x + top.x);
        stack.push_back({xm, image(xm)});
      }
    }
  }
  const double winding = total / two_pi;
  r.value = int(std::lround(winding));
  if (std::abs(winding - double(r.value)) > 0.1) r.certified = false;
  return r;
}

inline std::vector<Vec> circle_polygon(const Vec& center, double radius,
                                       std::size_t sides = 64) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  std::vector<Vec> v;
  v.reserve(sides);
  for (std::size_t i = 0; i < sides; ++i) {
    const double t = two_pi * double(i) / double(sides);
    Vec x = center;
    x[0] += radius * std::cos(t);
    x[1] += radius * std::sin(t);
    v.push_back(std::move(x));
  }
  return v;
}

struct IsolationOptions {
  double min_norm = 0.0;             // required min |F| on the sphere
  std::size_t samples_per_dim = 64;  // total samples = 64 k
  std::uint64_t seed = 0x6b1f5ca7e01u;
};

// Sphere-isolation test: the map must stay bounded away from zero on a
// sphere of the given radius.  Returns the observed minimum norm.
inline double isolation_min_norm(const MapFn& F, const Vec& center,
                                 double radius, const IsolationOptions& opts,
                                 Vec* argmin = nullptr) {
  const Index k = center.size();
  Rng rng(opts.seed);
  const std::size_t count = opts.samples_per_dim * std::size_t(k);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) {
    const Vec x = center + radius * unit_vector(rng, k);
    const double nrm = F(x).norm();
    if (nrm < best) {
      best = nrm;
      if (argmin) *argmin = x;
    }
  }
  return best;
}

// Index of an isolated zero.  Dispatch: well-conditioned Jacobian (analytic
// or finite-difference) gives the sign of the determinant; a degenerate
// Jacobian falls back to the boundary degree for k in {1,2}.
inline DegreeResult index_of_zero(const MapFn& F, const Vec& zero,
                                  double radius,
                                  const std::optional<Mat>& jacobian,
                                  const IsolationOptions& isolation = {},
                                  double sigma_rtol = 1e-8) {
  const Index k = zero.size();
  if (isolation.min_norm > 0.0) {
    const double observed = isolation_min_norm(F, zero, radius, isolation);
    if (!(observed > isolation.min_norm))
      throw DegreeError(
          "isolation test failed: min |F| on the sphere of radius " +
          std::to_string(radius) + " is " + std::to_string(observed) +
          ", required > " + std::to_string(isolation.min_norm));
  }
  if (jacobian) {
    Eigen::JacobiSVD<Mat> svd(*jacobian);
    const auto& sv = svd.singularValues();
    if (sv[k - 1] > sigma_rtol * sv[0]) return index_nondegenerate(*jacobian, sigma_rtol);
  }
  if (k == 1) {
    const auto f1 = [&](double t) { return F(Vec::Constant(1, t))[0]; };
    return degree_1d(f1, zero[0] - radius, zero[0] + radius);
  }
  if (k == 2) return degree_2d(F, circle_polygon(zero, radius));
  throw DegreeError("degenerate zero in dimension " + std::to_string(k) +
                    ": boundary-degree computation is unsupported beyond the "
                    "planar case");
}

} // namespace bifkit
