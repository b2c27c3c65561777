#pragma once

// Closed-form worst-case bounds phi^-(z) <= phi_hat(z) <= phi^+(z) over a
// single consistent-parameter set, and their gradients.

#include <cmath>

#include "cautious/basis.hpp"
#include "cautious/regression.hpp"

namespace cautious {

enum class Side { plus, minus };

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;

  [[nodiscard]] double midpoint() const { return 0.5 * (lower + upper); }
  [[nodiscard]] double width() const { return upper - lower; }
};

namespace detail {

inline double radius(const ParameterSet& gamma, const Vector& b) {
  return std::sqrt(std::max(0.0, gamma.schur() * gamma.inverse_quadratic(b)));
}

}  // namespace detail

/// lse^T b(z) -+ sqrt((N|N22) b^T (-N22)^{-1} b).
inline Bounds phi_bounds(const ParameterSet& gamma, const BasisSet& basis, const Vector& z) {
  const Vector b = basis.eval(z);
  if (b.size() != gamma.dim()) throw ShapeError("phi_bounds: basis size differs from k");
  const double mid = gamma.lse().dot(b);
  const double r = detail::radius(gamma, b);
  return {mid - r, mid + r};
}

inline double phi_lse(const ParameterSet& gamma, const BasisSet& basis, const Vector& z) {
  return gamma.lse().dot(basis.eval(z));
}

inline double uncertainty(const ParameterSet& gamma, const BasisSet& basis, const Vector& z) {
  const Vector b = basis.eval(z);
  if (b.size() != gamma.dim()) throw ShapeError("uncertainty: basis size differs from k");
  return 2.0 * detail::radius(gamma, b);
}

/// Gradient of phi^+ (or phi^-) at z; undefined where b(z) = 0.
inline Vector grad_phi(const ParameterSet& gamma, const BasisSet& basis, const Vector& z,
                       Side side) {
  const Vector b = basis.eval(z);
  if (b.size() != gamma.dim()) throw ShapeError("grad_phi: basis size differs from k");
  if (b.norm() <= tol::kBasisNorm) {
    throw NonsmoothPointError("grad_phi: b(z) vanishes, bounds are not differentiable here");
  }
  const Vector pb = gamma.solve(b);
  const double sign = side == Side::plus ? 1.0 : -1.0;
  const Vector direction =
      gamma.lse() + sign * std::sqrt(gamma.schur()) * pb / std::sqrt(b.dot(pb));
  return basis.jacobian(z) * direction;
}

}  // namespace cautious
