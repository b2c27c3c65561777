#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace cautious;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (const double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST(Basis, QuadraticBasisAtThreeThree) {
  const BasisSet b = quadratic_basis(2);
  EXPECT_TRUE(b.eval(vec({3, 3})).isApprox(vec({1, 3, 3, 18})));
}

TEST(Basis, ConstantOnly) {
  const BasisSet b(2, {basis::Constant{}});
  EXPECT_EQ(b.eval(vec({5, -1}))(0), 1.0);
  EXPECT_TRUE(b.jacobian(vec({5, -1})).isZero());
}

TEST(Basis, MixedMonomial) {
  const BasisSet b(2, {basis::Monomial{{2, 1}}});
  EXPECT_DOUBLE_EQ(b.eval(vec({2, 3}))(0), 12.0);
}

TEST(Basis, JacobianOfQuadraticBasis) {
  const BasisSet b = quadratic_basis(2);
  Matrix expected(2, 4);
  expected << 0, 1, 0, 6, 0, 0, 1, 6;
  EXPECT_TRUE(b.jacobian(vec({3, 3})).isApprox(expected));
}

TEST(Basis, GaussianStationaryAtCenter) {
  const BasisSet b(1, {basis::Gaussian{vec({0}), 1.0}});
  EXPECT_EQ(b.jacobian(vec({0}))(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(b.eval(vec({0}))(0), 1.0);
}

TEST(Basis, JacobianAndHessianMatchFiniteDifferences) {
  testing_support::Rng rng(17);
  const BasisSet b(3, {basis::Constant{}, basis::Coordinate{2}, basis::Monomial{{2, 1, 0}},
                       basis::Monomial{{0, 0, 4}}, basis::SquaredNorm{},
                       basis::Gaussian{vec({0.3, -0.2, 0.1}), 0.8}});
  const double h = 1e-5;
  for (int trial = 0; trial < 30; ++trial) {
    const Vector z = testing_support::random_vector(3, rng, -1.5, 1.5);
    const Matrix jac = b.jacobian(z);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const Vector e = h * Vector::Unit(3, i);
      const Vector fd = (b.eval(z + e) - b.eval(z - e)) / (2 * h);
      EXPECT_LE((jac.row(i).transpose() - fd).norm(), 1e-7 * (1.0 + fd.norm()));
    }
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      const Matrix hess = b.hessian(j, z);
      for (Eigen::Index i = 0; i < 3; ++i) {
        const Vector e = h * Vector::Unit(3, i);
        const Vector fd = (b.jacobian(z + e).col(j) - b.jacobian(z - e).col(j)) / (2 * h);
        EXPECT_LE((hess.col(i) - fd).norm(), 1e-6 * (1.0 + fd.norm()));
      }
    }
  }
}

TEST(Basis, ConvexityClasses) {
  EXPECT_EQ(convexity_class(basis::Constant{}), ConvexityClass::affine);
  EXPECT_EQ(convexity_class(basis::Coordinate{0}), ConvexityClass::affine);
  EXPECT_EQ(convexity_class(basis::SquaredNorm{}), ConvexityClass::strictly_convex);
  EXPECT_EQ(convexity_class(basis::Monomial{{2, 0}}), ConvexityClass::convex);
  EXPECT_EQ(convexity_class(basis::Monomial{{1, 0}}), ConvexityClass::affine);
  EXPECT_EQ(convexity_class(basis::Monomial{{3, 0}}), ConvexityClass::unknown);
  EXPECT_EQ(convexity_class(basis::Monomial{{1, 1}}), ConvexityClass::unknown);
  EXPECT_EQ(convexity_class(basis::Gaussian{vec({0, 0}), 1.0}), ConvexityClass::unknown);
}

TEST(Basis, NonnegativeRange) {
  EXPECT_TRUE(nonnegative_range(basis::Constant{}));
  EXPECT_FALSE(nonnegative_range(basis::Coordinate{0}));
  EXPECT_TRUE(nonnegative_range(basis::Monomial{{2, 4}}));
  EXPECT_FALSE(nonnegative_range(basis::Monomial{{1, 2}}));
  EXPECT_TRUE(nonnegative_range(basis::SquaredNorm{}));
  EXPECT_TRUE(nonnegative_range(basis::Gaussian{vec({0}), 2.0}));
}

TEST(Basis, ValidationErrors) {
  EXPECT_THROW(BasisSet(2, {}), ShapeError);
  EXPECT_THROW(BasisSet(2, {basis::Coordinate{2}}), ShapeError);
  EXPECT_THROW(BasisSet(2, {basis::Monomial{{1}}}), ShapeError);
  EXPECT_THROW(BasisSet(2, {basis::Gaussian{vec({0, 0}), 0.0}}), ShapeError);
  const BasisSet b = quadratic_basis(2);
  EXPECT_THROW(b.eval(vec({1})), ShapeError);
}
