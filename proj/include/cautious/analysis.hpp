#pragma once

// Data-driven certificates: nonnegativity of all consistent parameters,
// convexity of phi^gamma and of the uncertainty, and the optimality-gap
// bracket around the true minimum.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cautious/basis.hpp"
#include "cautious/bounds.hpp"
#include "cautious/frank_wolfe.hpp"
#include "cautious/intersection.hpp"
#include "cautious/regression.hpp"

namespace cautious {

/// True iff every gamma in Gamma is entrywise nonnegative.
inline bool nonneg_params_test(const ParameterSet& gamma) {
  const SymQuadSet& n = gamma.N();
  const Inertia in = inertia(n.matrix(), n.pd_tol());
  const Matrix n22_inv = -gamma.inverse_shape();
  const Vector n22_inv_n21 = n22_inv * n.m21();
  const Vector lse = -n22_inv_n21;

  if (in.positive == 0 && (lse.array() >= 0.0).all()) return true;

  if (in.positive == 1 && (lse.array() > 0.0).all()) {
    for (Eigen::Index i = 0; i < gamma.dim(); ++i) {
      const double term = n22_inv_n21(i) * n22_inv_n21(i) / n22_inv(i, i);
      if (gamma.schur() + term > 0.0) return false;
    }
    return true;
  }
  return false;
}

enum class ConvexityVerdict { not_certified, convex, strictly_convex };
enum class CertificateMethod { lemma2, coordinate_intervals };

inline const char* to_string(ConvexityVerdict v) {
  switch (v) {
    case ConvexityVerdict::not_certified: return "not_certified";
    case ConvexityVerdict::convex: return "convex";
    case ConvexityVerdict::strictly_convex: return "strictly_convex";
  }
  return "not_certified";
}

inline const char* to_string(CertificateMethod m) {
  return m == CertificateMethod::lemma2 ? "lemma2" : "coordinate_intervals";
}

struct ConvexityCertificate {
  ConvexityVerdict verdict = ConvexityVerdict::not_certified;
  CertificateMethod method = CertificateMethod::lemma2;
  /// Per-coordinate parameter intervals (coordinate_intervals method only).
  std::vector<Interval> details;
};

namespace detail {

inline ConvexityVerdict verdict_from_nonnegativity(const ParameterSet& gamma,
                                                   const BasisSet& basis) {
  bool all_strict = true;
  for (Eigen::Index j = 0; j < basis.size(); ++j) {
    const ConvexityClass c = basis.convexity(j);
    if (c == ConvexityClass::unknown) return ConvexityVerdict::not_certified;
    if (c != ConvexityClass::strictly_convex) all_strict = false;
  }
  if (!nonneg_params_test(gamma)) return ConvexityVerdict::not_certified;
  // 0 is in Gamma iff [1; 0]^T N [1; 0] = N11 >= 0.
  if (all_strict && gamma.N().m11() < 0.0) return ConvexityVerdict::strictly_convex;
  return ConvexityVerdict::convex;
}

inline ConvexityCertificate certify_by_intervals(const ParameterSet& gamma,
                                                 const BasisSet& basis) {
  ConvexityCertificate cert;
  cert.method = CertificateMethod::coordinate_intervals;
  bool convex = true;
  bool strict = false;
  for (Eigen::Index j = 0; j < basis.size(); ++j) {
    const Interval iv = support_interval(gamma, Vector::Unit(gamma.dim(), j));
    cert.details.push_back(iv);
    switch (basis.convexity(j)) {
      case ConvexityClass::affine:
        break;
      case ConvexityClass::unknown:
        convex = false;
        break;
      case ConvexityClass::convex:
        if (iv.low < 0.0) convex = false;
        break;
      case ConvexityClass::strictly_convex:
        if (iv.low < 0.0) convex = false;
        if (iv.low > 0.0) strict = true;
        break;
    }
  }
  if (convex) {
    cert.verdict = strict ? ConvexityVerdict::strictly_convex : ConvexityVerdict::convex;
  }
  return cert;
}

}  // namespace detail

/// Sound, one-sided certificate that phi^gamma (hence phi^+) is (strictly) convex
/// for every gamma in Gamma.
inline ConvexityCertificate certify_convexity(const ParameterSet& gamma, const BasisSet& basis) {
  if (basis.size() != gamma.dim()) throw ShapeError("certify_convexity: basis size differs from k");
  ConvexityCertificate by_sign;
  by_sign.method = CertificateMethod::lemma2;
  by_sign.verdict = detail::verdict_from_nonnegativity(gamma, basis);
  if (by_sign.verdict == ConvexityVerdict::strictly_convex) return by_sign;
  ConvexityCertificate intervals = detail::certify_by_intervals(gamma, basis);
  if (static_cast<int>(intervals.verdict) > static_cast<int>(by_sign.verdict)) return intervals;
  if (by_sign.verdict == ConvexityVerdict::not_certified) return intervals;
  return by_sign;
}

/// Subsets of a certified set inherit its certificate; returns the strongest
/// certificate over the members.
inline ConvexityCertificate certify_convexity(const IntersectionSet& inter,
                                              const BasisSet& basis) {
  ConvexityCertificate best = certify_convexity(inter.members().front(), basis);
  for (std::size_t i = 1; i < inter.members().size(); ++i) {
    ConvexityCertificate c = certify_convexity(inter.members()[i], basis);
    if (static_cast<int>(c.verdict) > static_cast<int>(best.verdict)) best = std::move(c);
  }
  return best;
}

/// Sufficient check that U(.; Gamma) is convex: convex, nonnegative basis
/// functions and an entrywise nonnegative -N22^{-1}.
inline bool certify_uncertainty_convexity(const ParameterSet& gamma, const BasisSet& basis) {
  for (Eigen::Index j = 0; j < basis.size(); ++j) {
    if (basis.convexity(j) == ConvexityClass::unknown) return false;
    if (!nonnegative_range(basis[j])) return false;
  }
  return (gamma.inverse_shape().array() >= 0.0).all();
}

struct GapOptions {
  int grid_points = 17;
  SupportOptions support;
};

struct GapReport {
  double upper = 0.0;
  double lower = 0.0;
  double max_uncertainty = 0.0;
  Vector attained_at;
  /// True when max U over the polytope is exact (convex U or zero uncertainty).
  bool exact = false;
};

namespace detail {

inline std::vector<Vector> box_grid(const VertexList& vertices, int per_axis) {
  const Matrix v = stack_columns(vertices);
  const Vector lo = v.rowwise().minCoeff();
  const Vector hi = v.rowwise().maxCoeff();
  const Eigen::Index n = v.rows();
  std::vector<Vector> points;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  const int steps = std::max(per_axis, 2);
  while (true) {
    Vector p(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = lo(i) + (hi(i) - lo(i)) * idx[static_cast<std::size_t>(i)] / (steps - 1);
    }
    points.push_back(p);
    Eigen::Index i = 0;
    for (; i < n; ++i) {
      if (++idx[static_cast<std::size_t>(i)] < steps) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
    if (i == n) break;
  }
  return points;
}

}  // namespace detail

/// Bracket [upper - max_S U, upper] around min_S phi_hat, with upper = phi^+(z_bar).
inline GapReport optimality_gap(const IntersectionSet& inter, const BasisSet& basis,
                                const VertexList& polytope, const Vector& z_bar,
                                const GapOptions& opts = {}) {
  if (!in_hull(polytope, z_bar, 1e-8)) {
    throw PreconditionError("optimality_gap: z_bar lies outside the polytope");
  }
  GapReport report;
  report.upper = upper_intersection(inter, basis, z_bar, opts.support);
  report.attained_at = z_bar;

  const bool zero_uncertainty = inter.singleton_member().has_value();
  const bool convex_u = inter.size() == 1 &&
                        certify_uncertainty_convexity(inter.members().front(), basis);
  report.exact = zero_uncertainty || convex_u;
  if (zero_uncertainty) {
    report.lower = report.upper;
    return report;
  }

  std::vector<Vector> candidates = polytope;
  if (!convex_u) {
    for (auto& p : detail::box_grid(polytope, opts.grid_points)) {
      if (in_hull(polytope, p)) candidates.push_back(std::move(p));
    }
  }
  report.max_uncertainty = -std::numeric_limits<double>::infinity();
  for (const auto& p : candidates) {
    const double u = uncertainty_intersection(inter, basis, p, opts.support);
    if (u > report.max_uncertainty) {
      report.max_uncertainty = u;
      report.attained_at = p;
    }
  }
  report.lower = report.upper - report.max_uncertainty;
  return report;
}

}  // namespace cautious
