#pragma once

// Sets Z(M) = { v : [1; v]^T M [1; v] >= 0 } defined by a symmetric
// quadratic matrix inequality, and their ellipsoidal canonical form.

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "cautious/errors.hpp"

namespace cautious {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

namespace tol {
inline constexpr double kSymmetry = 1e-9;   // relative
inline constexpr double kPdRel = 1e-10;     // times ||M||
inline constexpr double kZeroRel = 1e-9;    // times max(1, ||M||)
inline constexpr double kBasisNorm = 1e-12;
inline constexpr double kSolver = 1e-8;
inline constexpr double kFeasibility = 1e-9;
inline constexpr double kFrankWolfe = 1e-7;
}  // namespace tol

struct Inertia {
  int positive = 0;
  int zero = 0;
  int negative = 0;

  friend bool operator==(const Inertia&, const Inertia&) = default;
};

namespace detail {

inline bool is_symmetric(const Matrix& m, double rel_tol = tol::kSymmetry) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

/// Eigenvalue signature of a symmetric matrix; eigenvalues within +-tol count as zero.
inline Inertia inertia(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) {
    throw ShapeError("inertia: matrix is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected square");
  }
  if (!detail::is_symmetric(m)) throw ShapeError("inertia: matrix is not symmetric");
  Inertia result;
  if (m.size() == 0) return result;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(detail::symmetrized(m),
                                                  Eigen::EigenvaluesOnly);
  for (const double lambda : eig.eigenvalues()) {
    if (lambda > tol) {
      ++result.positive;
    } else if (lambda < -tol) {
      ++result.negative;
    } else {
      ++result.zero;
    }
  }
  return result;
}

/// { v : (v - center)^T shape (v - center) <= level }, shape positive definite.
struct Ellipsoid {
  Vector center;
  Matrix shape;
  double level = 0.0;

  [[nodiscard]] Eigen::Index dim() const { return center.size(); }
  [[nodiscard]] bool is_singleton() const { return level == 0.0; }

  [[nodiscard]] double quadratic(const Vector& v) const {
    const Vector d = v - center;
    return d.dot(shape * d);
  }
};

/// Symmetric (1+l)x(1+l) matrix M describing Z(M) over R^l.
class SymQuadSet {
 public:
  SymQuadSet() = default;

  explicit SymQuadSet(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() < 2) {
      throw ShapeError("quadratic set matrix must be square with size >= 2, got " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    if (!m.allFinite()) throw ShapeError("quadratic set matrix has non-finite entries");
    if (!detail::is_symmetric(m)) {
      throw ShapeError("quadratic set matrix is not symmetric to relative tolerance 1e-9");
    }
    m_ = detail::symmetrized(m);
  }

  [[nodiscard]] const Matrix& matrix() const { return m_; }
  [[nodiscard]] Eigen::Index dim() const { return m_.rows() - 1; }

  [[nodiscard]] double m11() const { return m_(0, 0); }
  [[nodiscard]] Vector m21() const { return m_.col(0).tail(dim()); }
  [[nodiscard]] Matrix m22() const { return m_.bottomRightCorner(dim(), dim()); }

  [[nodiscard]] double norm() const { return m_.norm(); }
  [[nodiscard]] double pd_tol() const { return tol::kPdRel * norm(); }
  [[nodiscard]] double zero_tol() const { return tol::kZeroRel * std::max(1.0, norm()); }

  /// [1; v]^T M [1; v]
  [[nodiscard]] double evaluate(const Vector& v) const {
    if (v.size() != dim()) throw ShapeError("evaluate: vector has wrong dimension");
    return m11() + 2.0 * m21().dot(v) + v.dot(m22() * v);
  }

  [[nodiscard]] bool contains(const Vector& v) const { return evaluate(v) >= -zero_tol(); }

  [[nodiscard]] bool m22_negative_definite() const {
    return inertia(m22(), pd_tol()).negative == dim();
  }

 private:
  Matrix m_;
};

namespace detail {

/// Cholesky of -M22; throws when M22 is not negative definite.
inline Eigen::LLT<Matrix> neg_m22_factor(const SymQuadSet& m) {
  if (!m.m22_negative_definite()) {
    throw UnboundedSetError("unbounded or degenerate set: (2,2) block is not negative definite");
  }
  Eigen::LLT<Matrix> llt(-m.m22());
  if (llt.info() != Eigen::Success) {
    throw UnboundedSetError("unbounded or degenerate set: Cholesky of -M22 failed");
  }
  return llt;
}

}  // namespace detail

/// M11 - M12 M22^{-1} M21.
inline double schur_22(const SymQuadSet& m) {
  const auto llt = detail::neg_m22_factor(m);
  const Vector m21 = m.m21();
  return m.m11() + m21.dot(llt.solve(m21));
}

/// Completion of squares: Z(M) = { v : (v - c)^T (-M22) (v - c) <= M|M22 }.
inline Ellipsoid to_ellipsoid(const SymQuadSet& m) {
  const auto llt = detail::neg_m22_factor(m);
  const Vector m21 = m.m21();
  const Vector center = llt.solve(m21);
  double level = m.m11() + m21.dot(center);
  if (level < -m.zero_tol()) {
    throw EmptySetError("empty set: Schur complement " + std::to_string(level) +
                        " is negative");
  }
  // |level| <= zero_tol is treated as an exact singleton.
  if (level <= m.zero_tol()) level = 0.0;
  return Ellipsoid{center, -m.m22(), level};
}

/// S^{-1/2} for symmetric positive definite S.
inline Matrix inv_sqrt_spd(const Matrix& s) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
    throw PreconditionError("inv_sqrt_spd: matrix is not positive definite");
  }
  const Vector inv_sqrt = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

/// Uniform point of the unit ball in R^dim: uniform direction, radius U^(1/dim).
template <class Rng>
Vector sample_unit_ball(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vector u(dim);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < dim; ++i) u(i) = normal(rng);
    norm = u.norm();
  } while (norm == 0.0);
  const double radius = std::pow(uniform(rng), 1.0 / static_cast<double>(dim));
  return (radius / norm) * u;
}

/// Uniform draw from Z(M); the center when Z(M) is a singleton.
template <class Rng>
Vector sample_uniform(const SymQuadSet& m, Rng& rng) {
  const Ellipsoid e = to_ellipsoid(m);
  if (e.is_singleton()) return e.center;
  const Vector u = sample_unit_ball(e.dim(), rng);
  return e.center + std::sqrt(e.level) * (inv_sqrt_spd(e.shape) * u);
}

}  // namespace cautious
