#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace bifkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Errors.  Everything thrown by the library derives from Error so callers can
// catch one type at the CLI boundary.

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Configuration / input problems (bad JSON, unknown model, bad flag values).
class ConfigError : public Error {
public:
  using Error::Error;
};

// Trajectory left the admissible region or the stepper gave up.
// Carries the time at which integration failed.
class FlowError : public Error {
public:
  FlowError(const std::string& what, double t_fail)
      : Error(what), t_fail_(t_fail) {}
  double t_fail() const { return t_fail_; }

private:
  double t_fail_;
};

// A structural hypothesis of the reduction does not hold (rank drop,
// singular complement operator, fixed-point identity violated, ...).
class AssumptionError : public Error {
public:
  AssumptionError(std::string which, const std::string& what)
      : Error(what), which_(std::move(which)) {}
  // Short tag naming the violated hypothesis, e.g. "family-rank".
  const std::string& which() const { return which_; }

private:
  std::string which_;
};

// An iteration failed to converge within its budget.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

// Topological-degree preconditions violated (boundary zero, unsupported
// degenerate case, missing isolation).
class DegreeError : public Error {
public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Structure of the linear part.  When the drift matrix is block diagonal with
// 1x1 real blocks and 2x2 rotation blocks, its exponential is available in
// closed form and the integrator can treat the linear part exactly.

struct SpectralBlock {
  enum class Kind { Scalar, Rotation };
  Kind kind = Kind::Scalar;
  // Scalar: the diagonal entry d (block [d]).
  // Rotation: the angular rate w (block [[0, w], [-w, 0]]).
  double value = 0.0;

  Index size() const { return kind == Kind::Scalar ? 1 : 2; }

  static SpectralBlock scalar(double d) { return {Kind::Scalar, d}; }
  static SpectralBlock rotation(double w) { return {Kind::Rotation, w}; }
};

inline Index spectral_dimension(const std::vector<SpectralBlock>& blocks) {
  Index n = 0;
  for (const auto& b : blocks) n += b.size();
  return n;
}

// In-place action of exp(tau * A) on v for a block-structured A.
inline void apply_spectral_exp(const std::vector<SpectralBlock>& blocks,
                               double tau, Vec& v) {
  Index at = 0;
  for (const auto& b : blocks) {
    if (b.kind == SpectralBlock::Kind::Scalar) {
      v[at] *= std::exp(b.value * tau);
      at += 1;
    } else {
      const double c = std::cos(b.value * tau);
      const double s = std::sin(b.value * tau);
      const double v0 = v[at], v1 = v[at + 1];
      v[at] = c * v0 + s * v1;
      v[at + 1] = -s * v0 + c * v1;
      at += 2;
    }
  }
}

// Dense matrix equivalent of a block list (reference implementation; the
// integrator never materializes this).
inline Mat spectral_matrix(const std::vector<SpectralBlock>& blocks) {
  const Index n = spectral_dimension(blocks);
  Mat A = Mat::Zero(n, n);
  Index at = 0;
  for (const auto& b : blocks) {
    if (b.kind == SpectralBlock::Kind::Scalar) {
      A(at, at) = b.value;
      at += 1;
    } else {
      A(at, at + 1) = b.value;
      A(at + 1, at) = -b.value;
      at += 2;
    }
  }
  return A;
}

// ---------------------------------------------------------------------------
// Deterministic sampling helpers.  std::uniform_real_distribution is
// implementation-defined, so reproducible paths draw through these instead.

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform point on the unit sphere in R^k (Gaussian normalization).
inline Vec unit_vector(Rng& rng, Index k) {
  Vec v(k);
  while (true) {
    for (Index i = 0; i < k; ++i) {
      // Box-Muller from two uniforms; deterministic across platforms.
      const double u1 = std::max(uniform01(rng), 1e-300);
      const double u2 = uniform01(rng);
      v[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    const double nrm = v.norm();
    if (nrm > 1e-12) return v / nrm;
  }
}

} // namespace bifkit
