#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace cautious;
namespace ts = testing_support;

namespace {

const BasisSet kConstant(1, {basis::Constant{}});
const BasisSet kLinear(1, {basis::Coordinate{0}});

Vector scalar(double x) { return Vector::Constant(1, x); }

ParameterSet singleton(const Vector& g) {
  const Eigen::Index k = g.size();
  return ts::ellipsoid_set(g, Matrix::Identity(k, k), 0.0);
}

}  // namespace

TEST(PhiBounds, ConstantBasis) {
  const Bounds b = phi_bounds(ts::interval_set(1, 3), kConstant, scalar(17));
  EXPECT_DOUBLE_EQ(b.lower, 1.0);
  EXPECT_DOUBLE_EQ(b.upper, 3.0);
}

TEST(PhiBounds, LinearBasis) {
  const Bounds b = phi_bounds(ts::interval_set(1, 3), kLinear, scalar(2));
  EXPECT_DOUBLE_EQ(b.lower, 2.0);
  EXPECT_DOUBLE_EQ(b.upper, 6.0);
}

TEST(PhiBounds, SingletonCollapses) {
  const ts::Scenario sc;
  const ParameterSet g = singleton(sc.gamma_hat);
  const Vector z = (Vector(2) << 0.5, -1.0).finished();
  const Bounds b = phi_bounds(g, sc.basis, z);
  EXPECT_DOUBLE_EQ(b.lower, sc.truth(z));
  EXPECT_DOUBLE_EQ(b.upper, sc.truth(z));
  EXPECT_EQ(uncertainty(g, sc.basis, z), 0.0);
}

TEST(Uncertainty, Examples) {
  EXPECT_DOUBLE_EQ(uncertainty(ts::interval_set(1, 3), kConstant, scalar(0)), 2.0);
  EXPECT_DOUBLE_EQ(uncertainty(ts::interval_set(1, 3), kLinear, scalar(2)), 4.0);
}

TEST(GradPhi, Examples) {
  const ParameterSet g = ts::interval_set(1, 3);
  EXPECT_DOUBLE_EQ(grad_phi(g, kLinear, scalar(2), Side::plus)(0), 3.0);
  EXPECT_DOUBLE_EQ(grad_phi(g, kLinear, scalar(-2), Side::plus)(0), 1.0);
  EXPECT_DOUBLE_EQ(grad_phi(g, kLinear, scalar(2), Side::minus)(0), 1.0);
  const ts::Scenario sc;
  const Vector grad = grad_phi(singleton(sc.gamma_hat), sc.basis, sc.z0, Side::plus);
  EXPECT_TRUE(grad.isApprox((Vector(2) << 6, 6).finished()));
}

TEST(GradPhi, NonsmoothAtVanishingBasis) {
  EXPECT_THROW(grad_phi(ts::interval_set(1, 3), kLinear, scalar(0), Side::plus),
               NonsmoothPointError);
}

TEST(PhiBounds, SandwichTheTruthOnRandomInstances) {
  ts::Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = ts::random_instance(rng);
    for (int i = 0; i < 10; ++i) {
      const Vector z = ts::random_vector(inst.basis.input_dim(), rng, -3.0, 3.0);
      const Bounds b = phi_bounds(inst.gamma, inst.basis, z);
      const double truth = inst.gamma_hat.dot(inst.basis.eval(z));
      const double slack = 1e-7 * (1.0 + std::abs(truth));
      EXPECT_LE(b.lower, truth + slack);
      EXPECT_GE(b.upper, truth - slack);
      EXPECT_NEAR(b.width(), uncertainty(inst.gamma, inst.basis, z), 1e-9 * (1 + b.width()));
      EXPECT_NEAR(b.midpoint(), phi_lse(inst.gamma, inst.basis, z), 1e-9 * (1 + std::abs(truth)));
    }
  }
}

TEST(GradPhi, MatchesFiniteDifferences) {
  ts::Rng rng(32);
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = ts::random_instance(rng);
    const int n = inst.basis.input_dim();
    const Vector z = ts::random_vector(n, rng, -2.0, 2.0);
    if (inst.basis.eval(z).norm() < 1e-3) continue;
    for (const Side side : {Side::plus, Side::minus}) {
      const Vector g = grad_phi(inst.gamma, inst.basis, z, side);
      Vector fd(n);
      for (int i = 0; i < n; ++i) {
        const Vector e = h * Vector::Unit(n, i);
        const auto f = [&](const Vector& p) {
          const Bounds b = phi_bounds(inst.gamma, inst.basis, p);
          return side == Side::plus ? b.upper : b.lower;
        };
        fd(i) = (f(z + e) - f(z - e)) / (2 * h);
      }
      EXPECT_LE((g - fd).norm() / std::max(g.norm(), 1.0), 1e-5);
      ++checked;
    }
  }
  EXPECT_GT(checked, 300);
}
