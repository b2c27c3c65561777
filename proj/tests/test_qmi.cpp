#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "test_support.hpp"

using namespace cautious;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST(Inertia, DiagonalNegative) {
  EXPECT_EQ(inertia(mat2(-3, 0, 0, -1), 1e-12), (Inertia{0, 0, 2}));
}

TEST(Inertia, IndefiniteTwoByTwo) {
  EXPECT_EQ(inertia(mat2(-3, 2, 2, -1), 1e-12), (Inertia{1, 0, 1}));
}

TEST(Inertia, ZeroMatrix) { EXPECT_EQ(inertia(Matrix::Zero(3, 3), 1e-12), (Inertia{0, 3, 0})); }

TEST(Inertia, RejectsNonSquareAndAsymmetric) {
  EXPECT_THROW(inertia(Matrix::Zero(2, 3), 1e-12), ShapeError);
  EXPECT_THROW(inertia(mat2(1, 2, 0, 1), 1e-12), ShapeError);
}

TEST(Inertia, SylvesterCongruenceInvariance) {
  testing_support::Rng rng(11);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a(5, 5);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    Vector d(5);
    d << 2.0, -1.5, 0.0, 3.0, -0.7;
    const Matrix m = a * d.asDiagonal() * a.transpose();
    // Well-conditioned congruence: identity plus a small perturbation.
    Matrix s = Matrix::Identity(5, 5);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] += 0.2 * normal(rng);
    const Matrix c = s * m * s.transpose();
    const Matrix cs = 0.5 * (c + c.transpose());
    const Matrix ms = 0.5 * (m + m.transpose());
    EXPECT_EQ(inertia(ms, 1e-8 * ms.norm()), inertia(cs, 1e-8 * cs.norm()));
  }
}

TEST(SymQuadSet, SymmetrizesWithinToleranceAndRejectsBeyond) {
  Matrix m = mat2(-3, 2, 2, -1);
  m(0, 1) += 1e-12;
  const SymQuadSet s(m);
  EXPECT_EQ(s.matrix()(0, 1), s.matrix()(1, 0));
  m(0, 1) += 1e-3;
  EXPECT_THROW(SymQuadSet{m}, ShapeError);
}

TEST(SymQuadSet, RejectsNonFinite) {
  Matrix m = mat2(-3, 2, 2, -1);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(SymQuadSet{m}, ShapeError);
}

TEST(Schur, ScalarExamples) {
  EXPECT_DOUBLE_EQ(schur_22(SymQuadSet(mat2(-3, 2, 2, -1))), 1.0);
  EXPECT_DOUBLE_EQ(schur_22(SymQuadSet(mat2(3, 1, 1, -1))), 4.0);
  EXPECT_DOUBLE_EQ(schur_22(ball_noise(7.5, 4)), 7.5);
}

TEST(Schur, UnboundedErrors) {
  EXPECT_THROW(schur_22(SymQuadSet(Matrix::Identity(2, 2))), UnboundedSetError);
}

TEST(Schur, MatchesInverseFormula) {
  // 1 / (M^{-1})_{11} is the Schur complement of the lower-right block.
  testing_support::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix s = testing_support::random_spd(4, rng);
    const Vector c = testing_support::random_vector(4, rng);
    const auto g = testing_support::ellipsoid_set(c, s, 0.5 + trial * 0.1);
    const Matrix& m = g.N().matrix();
    const double oracle = 1.0 / m.inverse()(0, 0);
    EXPECT_NEAR(schur_22(g.N()), oracle, 1e-10 * std::abs(oracle));
  }
}

TEST(Ellipsoid, NoiseBall) {
  const Ellipsoid e = to_ellipsoid(ball_noise(30.0, 4));
  EXPECT_TRUE(e.center.isZero());
  EXPECT_TRUE(e.shape.isIdentity());
  EXPECT_DOUBLE_EQ(e.level, 30.0);
}

TEST(Ellipsoid, ScalarInterval) {
  const Ellipsoid e = to_ellipsoid(SymQuadSet(mat2(-3, 2, 2, -1)));
  EXPECT_DOUBLE_EQ(e.center(0), 2.0);
  EXPECT_DOUBLE_EQ(e.shape(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(e.level, 1.0);
}

TEST(Ellipsoid, Singleton) {
  Matrix m = -Matrix::Identity(3, 3);
  m(0, 0) = 0.0;
  const Ellipsoid e = to_ellipsoid(SymQuadSet(m));
  EXPECT_TRUE(e.center.isZero());
  EXPECT_EQ(e.level, 0.0);
  EXPECT_TRUE(e.is_singleton());
}

TEST(Ellipsoid, EmptyAndUnboundedErrors) {
  Matrix m = -Matrix::Identity(2, 2);
  EXPECT_THROW(to_ellipsoid(SymQuadSet(m)), EmptySetError);
  m(1, 1) = 1.0;
  EXPECT_THROW(to_ellipsoid(SymQuadSet(m)), UnboundedSetError);
}

TEST(Ellipsoid, MembershipEquivalence) {
  testing_support::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing_support::ellipsoid_set(testing_support::random_vector(3, rng),
                                                  testing_support::random_spd(3, rng), 1.3);
    const Ellipsoid e = to_ellipsoid(g.N());
    for (int i = 0; i < 200; ++i) {
      const Vector v = testing_support::random_vector(3, rng, -3.0, 3.0);
      const double q = e.quadratic(v) - e.level;
      if (std::abs(q) < 1e-9) continue;
      EXPECT_EQ(g.N().evaluate(v) >= 0.0, q <= 0.0);
    }
  }
}

TEST(InvSqrt, Identity) {
  testing_support::Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix s = testing_support::random_spd(5, rng, 0.01, 50.0);
    const Matrix r = inv_sqrt_spd(s);
    EXPECT_LE((r.transpose() * s * r - Matrix::Identity(5, 5)).norm(), 1e-8);
  }
}

TEST(Sampling, BallMembershipAndMoment) {
  const SymQuadSet pi = ball_noise(30.0, 4);
  testing_support::Rng rng(2024);
  double moment = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const Vector v = sample_uniform(pi, rng);
    ASSERT_LE(v.squaredNorm(), 30.0 * (1.0 + 1e-12));
    ASSERT_TRUE(pi.contains(v));
    moment += v.squaredNorm() / 30.0;
  }
  EXPECT_NEAR(moment / draws, 4.0 / 6.0, 0.01 * 4.0 / 6.0);
}

TEST(Sampling, SingletonIsDeterministic) {
  Matrix m = -Matrix::Identity(3, 3);
  m(0, 0) = 0.0;
  testing_support::Rng rng(1);
  const Vector v = sample_uniform(SymQuadSet(m), rng);
  EXPECT_EQ(v(0), 0.0);
  EXPECT_EQ(v(1), 0.0);
}

TEST(Sampling, ScalarUniformKolmogorovSmirnov) {
  const SymQuadSet m(mat2(1, 0, 0, -1));
  testing_support::Rng rng(99);
  const int draws = 100000;
  std::vector<double> xs(draws);
  for (auto& x : xs) x = sample_uniform(m, rng)(0);
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double cdf = 0.5 * (xs[static_cast<std::size_t>(i)] + 1.0);
    ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / draws),
                   std::abs(cdf - static_cast<double>(i + 1) / draws)});
  }
  EXPECT_LT(ks, 0.01);
}

TEST(Sampling, RoundTripOnRandomSets) {
  testing_support::Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = testing_support::ellipsoid_set(testing_support::random_vector(4, rng),
                                                  testing_support::random_spd(4, rng, 0.05, 20.0),
                                                  0.1 + trial);
    for (int i = 0; i < 200; ++i) {
      EXPECT_GE(g.N().evaluate(sample_uniform(g.N(), rng)), -g.N().zero_tol());
    }
  }
}
