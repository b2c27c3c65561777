#pragma once

// Shared generators and brute-force oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "cautious/cautious.hpp"

namespace testing_support {

using cautious::BasisSet;
using cautious::Matrix;
using cautious::ParameterSet;
using cautious::SymQuadSet;
using cautious::Vector;
namespace basis = cautious::basis;

using Rng = std::mt19937_64;

/// Gamma = {g : (g - c)^T S (g - c) <= level}.
inline ParameterSet ellipsoid_set(const Vector& c, const Matrix& s, double level) {
  const Eigen::Index k = c.size();
  Matrix n(k + 1, k + 1);
  n(0, 0) = level - c.dot(s * c);
  n.block(1, 0, k, 1) = s * c;
  n.block(0, 1, 1, k) = (s * c).transpose();
  n.bottomRightCorner(k, k) = -s;
  return cautious::make_parameter_set(SymQuadSet(n));
}

inline ParameterSet interval_set(double lo, double hi) {
  Vector c(1);
  c << 0.5 * (lo + hi);
  const double r = 0.5 * (hi - lo);
  return ellipsoid_set(c, Matrix::Identity(1, 1), r * r);
}

inline Matrix random_spd(Eigen::Index k, Rng& rng, double min_eig = 0.2, double max_eig = 3.0) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> eig(min_eig, max_eig);
  Matrix a(k, k);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  const Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix q = qr.householderQ();
  Vector d(k);
  for (Eigen::Index i = 0; i < k; ++i) d(i) = eig(rng);
  return q * d.asDiagonal() * q.transpose();
}

inline Vector random_vector(Eigen::Index k, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(k);
  for (Eigen::Index i = 0; i < k; ++i) v(i) = u(rng);
  return v;
}

inline Vector random_unit(Eigen::Index k, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector v(k);
  do {
    for (Eigen::Index i = 0; i < k; ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

/// k distinct primitives over R^n, always starting with the constant.
inline BasisSet random_basis(int n, int k, Rng& rng) {
  std::vector<cautious::BasisPrimitive> pool{basis::Constant{}};
  for (int i = 0; i < n; ++i) pool.emplace_back(basis::Coordinate{i});
  pool.emplace_back(basis::SquaredNorm{});
  for (int i = 0; i < n; ++i) {
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    e[static_cast<std::size_t>(i)] = 2;
    pool.emplace_back(basis::Monomial{e});
  }
  if (n >= 2) pool.emplace_back(basis::Monomial{[&] {
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    e[0] = 1;
    e[1] = 1;
    return e;
  }()});
  pool.emplace_back(basis::Gaussian{Vector::Zero(n), 1.0});
  pool.emplace_back(basis::Gaussian{Vector::Constant(n, 0.5), 0.7});
  std::shuffle(pool.begin() + 1, pool.end(), rng);
  pool.resize(static_cast<std::size_t>(std::min<int>(k, static_cast<int>(pool.size()))));
  return BasisSet(n, pool);
}

struct Instance {
  BasisSet basis;
  ParameterSet gamma;
  Vector gamma_hat;
  SymQuadSet noise;
};

/// Synthetic data: n <= 3, k <= 6, T <= 12, uniform ball noise.
inline Instance random_instance(Rng& rng, int max_n = 3, int max_k = 6, int max_t = 12) {
  std::uniform_int_distribution<int> pick_n(1, max_n);
  std::uniform_real_distribution<double> pick_q(0.05, 4.0);
  while (true) {
    const int n = pick_n(rng);
    const int pool = 2 * n + 4 + (n >= 2 ? 1 : 0);
    const int k = std::uniform_int_distribution<int>(1, std::min(max_k, pool))(rng);
    const int t = std::uniform_int_distribution<int>(k, std::max(k, max_t))(rng);
    BasisSet b = random_basis(n, k, rng);
    const Vector gh = random_vector(b.size(), rng, -2.0, 2.0);
    const SymQuadSet noise = cautious::ball_noise(pick_q(rng), t);
    std::vector<Vector> points;
    for (int i = 0; i < t; ++i) points.push_back(random_vector(n, rng, -2.0, 2.0));
    const Vector w = cautious::sample_uniform(noise, rng);
    cautious::RowVector y(t);
    for (int i = 0; i < t; ++i) y(i) = gh.dot(b.eval(points[static_cast<std::size_t>(i)])) + w(i);
    try {
      ParameterSet g = cautious::regress(cautious::assemble_batch(b, points, y), noise);
      // Keep instances that are not numerically degenerate.
      const Eigen::SelfAdjointEigenSolver<Matrix> eig(g.ellipsoid().shape);
      if (eig.eigenvalues().minCoeff() < 1e-6 * eig.eigenvalues().maxCoeff()) continue;
      return {std::move(b), std::move(g), gh, noise};
    } catch (const cautious::UnboundedSetError&) {
    }
  }
}

/// Point of the Gamma ellipsoid for a direction u of the unit ball.
inline Vector ellipsoid_point(const ParameterSet& g, const Matrix& inv_sqrt, const Vector& u) {
  return g.lse() + std::sqrt(g.schur()) * (inv_sqrt * u);
}

/// Brute-force sup of gamma^T v over Gamma: random boundary samples followed by
/// a shrinking random search on the sphere around the best sample.
inline double brute_support(const ParameterSet& g, const Vector& v, Rng& rng, int samples) {
  const Matrix inv_sqrt = cautious::inv_sqrt_spd(g.ellipsoid().shape);
  const Eigen::Index k = g.dim();
  const int global = samples / 2;
  Vector best_u = random_unit(k, rng);
  double best = ellipsoid_point(g, inv_sqrt, best_u).dot(v);
  for (int i = 1; i < global; ++i) {
    const Vector u = random_unit(k, rng);
    const double val = ellipsoid_point(g, inv_sqrt, u).dot(v);
    if (val > best) {
      best = val;
      best_u = u;
    }
  }
  double radius = 0.5;
  int failures = 0;
  for (int i = global; i < samples; ++i) {
    Vector u = best_u + radius * random_unit(k, rng);
    u /= u.norm();
    const double val = ellipsoid_point(g, inv_sqrt, u).dot(v);
    if (val > best) {
      best = val;
      best_u = u;
      failures = 0;
    } else if (++failures > 40) {
      radius *= 0.5;
      failures = 0;
    }
  }
  return best;
}

/// The quadratic test scenario: phi(z) = 1 + z^T z on R^2, four-point stencil, ball noise q.
struct Scenario {
  BasisSet basis = cautious::quadratic_basis(2);
  Vector gamma_hat = (Vector(4) << 1.0, 0.0, 0.0, 1.0).finished();
  cautious::SampleStencil stencil{std::vector<Vector>{
      Vector::Zero(2), Vector::Unit(2, 0), Vector::Unit(2, 1), -Vector::Ones(2)}};
  Vector z0 = (Vector(2) << 3.0, 3.0).finished();

  [[nodiscard]] SymQuadSet noise(double q) const { return cautious::ball_noise(q, 4); }
  [[nodiscard]] double truth(const Vector& z) const { return 1.0 + z.squaredNorm(); }
};

/// Minimum of f over an axis grid of the polytope's bounding box, restricted to the polytope.
template <class F>
double grid_min(const cautious::VertexList& vertices, F&& f, int per_axis = 41) {
  const Matrix v = cautious::detail::stack_columns(vertices);
  const Vector lo = v.rowwise().minCoeff();
  const Vector hi = v.rowwise().maxCoeff();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : vertices) best = std::min(best, f(p));
  if (v.rows() != 2) return best;
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      Vector p(2);
      p << lo(0) + (hi(0) - lo(0)) * i / (per_axis - 1), lo(1) + (hi(1) - lo(1)) * j / (per_axis - 1);
      if (cautious::in_hull(vertices, p)) best = std::min(best, f(p));
    }
  }
  return best;
}

}  // namespace testing_support
