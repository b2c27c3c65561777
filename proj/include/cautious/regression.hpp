#pragma once

// Set-valued regression: from measurements (Y, Phi) and a noise model Pi,
// the set of all parameters consistent with the data.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cautious/basis.hpp"
#include "cautious/qmi.hpp"

namespace cautious {

/// Samples z_i, measured row Y (1 x T) and Phi (k x T) with Phi.col(i) = b(z_i).
struct MeasurementBatch {
  std::vector<Vector> points;
  RowVector y;
  Matrix phi;

  [[nodiscard]] Eigen::Index samples() const { return y.size(); }
};

inline MeasurementBatch assemble_batch(const BasisSet& basis, const std::vector<Vector>& points,
                                       const RowVector& y) {
  if (points.empty()) throw ShapeError("measurement batch needs at least one sample");
  if (static_cast<Eigen::Index>(points.size()) != y.size()) {
    throw ShapeError("measurement batch: " + std::to_string(points.size()) + " points but " +
                     std::to_string(y.size()) + " measurements");
  }
  MeasurementBatch batch{points, y, Matrix(basis.size(), y.size())};
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    batch.phi.col(i) = basis.eval(points[static_cast<std::size_t>(i)]);
  }
  return batch;
}

/// Diagonal noise model W W^T <= q, i.e. Pi = diag(q, -I_T).
inline SymQuadSet ball_noise(double q, Eigen::Index samples) {
  if (!(q >= 0.0)) throw ConfigError("ball noise bound q must be >= 0");
  Matrix pi = -Matrix::Identity(samples + 1, samples + 1);
  pi(0, 0) = q;
  return SymQuadSet(pi);
}

/// Throws unless Pi22 < 0 and Pi|Pi22 >= 0.
inline void check_noise_model(const SymQuadSet& noise) {
  if (!noise.m22_negative_definite()) {
    throw PreconditionError("noise model: Pi22 is not negative definite");
  }
  if (schur_22(noise) < -noise.zero_tol()) {
    throw PreconditionError("noise model: Schur complement Pi|Pi22 is negative");
  }
}

/// N = [1 Y; 0 -Phi] Pi [1 Y; 0 -Phi]^T.
inline SymQuadSet build_N(const MeasurementBatch& batch, const SymQuadSet& noise) {
  const Eigen::Index t = batch.samples();
  const Eigen::Index k = batch.phi.rows();
  if (batch.phi.cols() != t) throw ShapeError("build_N: Phi has wrong number of columns");
  if (noise.dim() != t) {
    throw ShapeError("build_N: noise model is for " + std::to_string(noise.dim()) +
                     " samples, batch has " + std::to_string(t));
  }
  check_noise_model(noise);
  Matrix lift = Matrix::Zero(k + 1, t + 1);
  lift(0, 0) = 1.0;
  lift.block(0, 1, 1, t) = batch.y;
  lift.block(1, 1, k, t) = -batch.phi;
  const Matrix n = lift * noise.matrix() * lift.transpose();
  return SymQuadSet(detail::symmetrized(n));
}

/// Validated bounded, nonempty Gamma = Z(N) with cached center and Schur scalar.
class ParameterSet {
 public:
  [[nodiscard]] const SymQuadSet& N() const { return n_; }
  [[nodiscard]] Eigen::Index dim() const { return ellipsoid_.dim(); }
  /// Least-squares estimate -N22^{-1} N21.
  [[nodiscard]] const Vector& lse() const { return ellipsoid_.center; }
  /// N|N22, clamped to exactly 0 within zero_tol.
  [[nodiscard]] double schur() const { return ellipsoid_.level; }
  [[nodiscard]] const Ellipsoid& ellipsoid() const { return ellipsoid_; }
  [[nodiscard]] bool is_singleton() const { return ellipsoid_.is_singleton(); }

  /// (-N22)^{-1} x
  [[nodiscard]] Vector solve(const Vector& x) const { return factor_.solve(x); }
  /// x^T (-N22)^{-1} x
  [[nodiscard]] double inverse_quadratic(const Vector& x) const { return x.dot(solve(x)); }
  [[nodiscard]] Matrix inverse_shape() const {
    return factor_.solve(Matrix::Identity(dim(), dim()));
  }

  /// (gamma - lse)^T (-N22) (gamma - lse) - schur; nonpositive on Gamma.
  [[nodiscard]] double violation(const Vector& gamma) const {
    return ellipsoid_.quadratic(gamma) - schur();
  }

  friend ParameterSet make_parameter_set(const SymQuadSet& n);

 private:
  ParameterSet(SymQuadSet n, Ellipsoid e, Eigen::LLT<Matrix> factor)
      : n_(std::move(n)), ellipsoid_(std::move(e)), factor_(std::move(factor)) {}

  SymQuadSet n_;
  Ellipsoid ellipsoid_;
  Eigen::LLT<Matrix> factor_;
};

inline ParameterSet make_parameter_set(const SymQuadSet& n) {
  if (!n.m22_negative_definite()) {
    throw UnboundedSetError(
        "data not sufficiently exciting: N22 is not negative definite (Phi lacks full row "
        "rank)");
  }
  Ellipsoid e;
  try {
    e = to_ellipsoid(n);
  } catch (const EmptySetError&) {
    throw EmptySetError("inconsistent data/noise model: N|N22 is negative");
  }
  Eigen::LLT<Matrix> factor(e.shape);
  return ParameterSet(n, std::move(e), std::move(factor));
}

inline ParameterSet regress(const MeasurementBatch& batch, const SymQuadSet& noise) {
  return make_parameter_set(build_N(batch, noise));
}

struct Interval {
  double low = 0.0;
  double high = 0.0;

  [[nodiscard]] double width() const { return high - low; }
};

/// inf / sup of gamma^T v over Gamma.
inline Interval support_interval(const ParameterSet& gamma, const Vector& v) {
  if (v.size() != gamma.dim()) throw ShapeError("support_interval: direction has wrong size");
  const double mid = gamma.lse().dot(v);
  const double radius = std::sqrt(std::max(0.0, gamma.schur() * gamma.inverse_quadratic(v)));
  return {mid - radius, mid + radius};
}

/// Gamma_lambda = Z(N + diag(4 lambda (1 + lambda) N|N22, 0)).
inline ParameterSet inflate_lambda(const ParameterSet& gamma, double lambda) {
  if (!(lambda >= 0.0)) throw PreconditionError("inflate_lambda: lambda must be >= 0");
  Matrix n = gamma.N().matrix();
  n(0, 0) += 4.0 * lambda * (1.0 + lambda) * gamma.schur();
  return make_parameter_set(SymQuadSet(n));
}

}  // namespace cautious
