#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace cautious;
namespace ts = testing_support;

namespace {

VertexList square() {
  VertexList v;
  for (const auto& [x, y] : std::vector<std::pair<double, double>>{{0, 0}, {1, 0}, {1, 1}, {0, 1}}) {
    v.push_back((Vector(2) << x, y).finished());
  }
  return v;
}

Vector first_vertex_weights(std::size_t n) {
  Vector w = Vector::Zero(static_cast<Eigen::Index>(n));
  w(0) = 1.0;
  return w;
}

}  // namespace

TEST(Hull, ProjectionAndMembership) {
  const VertexList s = square();
  EXPECT_TRUE(in_hull(s, (Vector(2) << 0.3, 0.7).finished()));
  EXPECT_TRUE(in_hull(s, (Vector(2) << 1.0, 0.5).finished()));
  EXPECT_FALSE(in_hull(s, (Vector(2) << 1.01, 0.5).finished()));
  const HullProjection p = project_to_hull(s, (Vector(2) << 2.0, 0.5).finished());
  EXPECT_NEAR(p.distance, 1.0, 1e-9);
  EXPECT_NEAR(p.point(0), 1.0, 1e-9);
  EXPECT_NEAR(p.weights.sum(), 1.0, 1e-12);
  EXPECT_GE(p.weights.minCoeff(), 0.0);
}

TEST(FrankWolfe, QuadraticInteriorMinimum) {
  const Vector target = (Vector(2) << 0.3, 0.6).finished();
  const auto f = [&](const Vector& z) { return ValueAndGradient{(z - target).squaredNorm(), 2.0 * (z - target)}; };
  const auto r = frank_wolfe(f, square(), first_vertex_weights(4));
  EXPECT_TRUE(r.converged);
  EXPECT_LE((r.point - target).norm(), 1e-3);
  EXPECT_LE(r.gap, 1e-7);
}

TEST(FrankWolfe, LinearObjectiveEndsAtVertex) {
  const Vector c = (Vector(2) << 1.0, -2.0).finished();
  const auto f = [&](const Vector& z) { return ValueAndGradient{c.dot(z), c}; };
  const auto r = frank_wolfe(f, square(), first_vertex_weights(4));
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.point.isApprox((Vector(2) << 0, 1).finished()));
  EXPECT_DOUBLE_EQ(r.value, -2.0);
}

TEST(FrankWolfe, ConstantObjectiveStaysPut) {
  const auto f = [](const Vector& z) { return ValueAndGradient{4.0, Vector::Zero(z.size())}; };
  const auto r = frank_wolfe(f, square(), first_vertex_weights(4));
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_TRUE(r.point.isApprox(square().front()));
}

TEST(FrankWolfe, BoundaryMinimumOfConvexFunction) {
  // min (x - 2)^2 + (y - 0.5)^2 over the unit square is (1, 0.5).
  const auto f = [](const Vector& z) {
    const Vector d = z - (Vector(2) << 2.0, 0.5).finished();
    return ValueAndGradient{d.squaredNorm(), 2.0 * d};
  };
  const auto r = frank_wolfe(f, square(), first_vertex_weights(4));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.point(0), 1.0, 1e-6);
  EXPECT_NEAR(r.point(1), 0.5, 1e-4);
}

TEST(FrankWolfe, MonotoneAndMatchesGridOnRandomConvexQuadratics) {
  ts::Rng rng(51);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix a = ts::random_spd(2, rng, 0.1, 5.0);
    const Vector c = ts::random_vector(2, rng, -1.0, 2.0);
    VertexList tri{ts::random_vector(2, rng), ts::random_vector(2, rng), ts::random_vector(2, rng)};
    const auto fval = [&](const Vector& z) { return (z - c).dot(a * (z - c)); };
    const auto f = [&](const Vector& z) { return ValueAndGradient{fval(z), 2.0 * a * (z - c)}; };
    const auto r = frank_wolfe(f, tri, first_vertex_weights(3));
    EXPECT_LE(r.value, fval(tri.front()));
    EXPECT_LE(r.value, ts::grid_min(tri, fval, 41) + 1e-6);
    EXPECT_NEAR(r.weights.sum(), 1.0, 1e-12);
  }
}

TEST(FrankWolfe, RejectsBadWeights) {
  const auto f = [](const Vector& z) { return ValueAndGradient{0.0, Vector::Zero(z.size())}; };
  EXPECT_THROW(frank_wolfe(f, square(), Vector::Ones(3) / 3.0), ShapeError);
  EXPECT_THROW(frank_wolfe(f, VertexList{}, Vector()), ShapeError);
}
