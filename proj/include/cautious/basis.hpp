#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "cautious/qmi.hpp"

namespace cautious {

enum class ConvexityClass { affine, convex, strictly_convex, unknown };

inline const char* to_string(ConvexityClass c) {
  switch (c) {
    case ConvexityClass::affine: return "affine";
    case ConvexityClass::convex: return "convex";
    case ConvexityClass::strictly_convex: return "strictly_convex";
    case ConvexityClass::unknown: return "unknown";
  }
  return "unknown";
}

namespace basis {

struct Constant {};

struct Coordinate {
  int index = 0;
};

/// prod_i z_i^exponents[i]
struct Monomial {
  std::vector<int> exponents;
};

struct SquaredNorm {};

/// exp(-||z - center||^2 / (2 width^2))
struct Gaussian {
  Vector center;
  double width = 1.0;
};

}  // namespace basis

using BasisPrimitive =
    std::variant<basis::Constant, basis::Coordinate, basis::Monomial, basis::SquaredNorm,
                 basis::Gaussian>;

namespace detail {

inline double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

inline double monomial_value(const std::vector<int>& e, const Vector& z) {
  double v = 1.0;
  for (std::size_t i = 0; i < e.size(); ++i) v *= ipow(z(static_cast<Eigen::Index>(i)), e[i]);
  return v;
}

/// Value of the monomial after differentiating by the coordinates in `by`.
inline double monomial_derivative(std::vector<int> e, const Vector& z,
                                  std::initializer_list<std::size_t> by) {
  double coeff = 1.0;
  for (const std::size_t i : by) {
    if (e[i] == 0) return 0.0;
    coeff *= e[i];
    --e[i];
  }
  return coeff * monomial_value(e, z);
}

}  // namespace detail

inline double evaluate(const BasisPrimitive& p, const Vector& z) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, basis::Constant>) {
          return 1.0;
        } else if constexpr (std::is_same_v<T, basis::Coordinate>) {
          return z(f.index);
        } else if constexpr (std::is_same_v<T, basis::Monomial>) {
          return detail::monomial_value(f.exponents, z);
        } else if constexpr (std::is_same_v<T, basis::SquaredNorm>) {
          return z.squaredNorm();
        } else {
          return std::exp(-(z - f.center).squaredNorm() / (2.0 * f.width * f.width));
        }
      },
      p);
}

inline Vector gradient(const BasisPrimitive& p, const Vector& z) {
  const Eigen::Index n = z.size();
  return std::visit(
      [&](const auto& f) -> Vector {
        using T = std::decay_t<decltype(f)>;
        Vector g = Vector::Zero(n);
        if constexpr (std::is_same_v<T, basis::Coordinate>) {
          g(f.index) = 1.0;
        } else if constexpr (std::is_same_v<T, basis::Monomial>) {
          for (Eigen::Index i = 0; i < n; ++i) {
            g(i) = detail::monomial_derivative(f.exponents, z, {static_cast<std::size_t>(i)});
          }
        } else if constexpr (std::is_same_v<T, basis::SquaredNorm>) {
          g = 2.0 * z;
        } else if constexpr (std::is_same_v<T, basis::Gaussian>) {
          const double w2 = f.width * f.width;
          g = -(z - f.center) / w2 * evaluate(p, z);
        }
        return g;
      },
      p);
}

inline Matrix hessian(const BasisPrimitive& p, const Vector& z) {
  const Eigen::Index n = z.size();
  return std::visit(
      [&](const auto& f) -> Matrix {
        using T = std::decay_t<decltype(f)>;
        Matrix h = Matrix::Zero(n, n);
        if constexpr (std::is_same_v<T, basis::Monomial>) {
          for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
              h(i, j) = detail::monomial_derivative(
                  f.exponents, z, {static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
            }
          }
        } else if constexpr (std::is_same_v<T, basis::SquaredNorm>) {
          h = 2.0 * Matrix::Identity(n, n);
        } else if constexpr (std::is_same_v<T, basis::Gaussian>) {
          const double w2 = f.width * f.width;
          const Vector d = z - f.center;
          h = evaluate(p, z) * (d * d.transpose() / (w2 * w2) - Matrix::Identity(n, n) / w2);
        }
        return h;
      },
      p);
}

inline ConvexityClass convexity_class(const BasisPrimitive& p) {
  return std::visit(
      [](const auto& f) -> ConvexityClass {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, basis::Constant> ||
                      std::is_same_v<T, basis::Coordinate>) {
          return ConvexityClass::affine;
        } else if constexpr (std::is_same_v<T, basis::SquaredNorm>) {
          return ConvexityClass::strictly_convex;
        } else if constexpr (std::is_same_v<T, basis::Gaussian>) {
          return ConvexityClass::unknown;
        } else {
          int degree = 0;
          int variables = 0;
          for (const int e : f.exponents) {
            degree += e;
            if (e > 0) ++variables;
          }
          if (degree <= 1) return ConvexityClass::affine;
          if (variables == 1 && degree % 2 == 0) return ConvexityClass::convex;
          return ConvexityClass::unknown;
        }
      },
      p);
}

/// True when the primitive is nonnegative on all of R^n.
inline bool nonnegative_range(const BasisPrimitive& p) {
  return std::visit(
      [](const auto& f) -> bool {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, basis::Coordinate>) {
          return false;
        } else if constexpr (std::is_same_v<T, basis::Monomial>) {
          for (const int e : f.exponents) {
            if (e % 2 != 0) return false;
          }
          return true;
        } else {
          return true;
        }
      },
      p);
}

inline std::string describe(const BasisPrimitive& p) {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, basis::Constant>) {
          return "1";
        } else if constexpr (std::is_same_v<T, basis::Coordinate>) {
          return "z" + std::to_string(f.index + 1);
        } else if constexpr (std::is_same_v<T, basis::SquaredNorm>) {
          return "|z|^2";
        } else if constexpr (std::is_same_v<T, basis::Gaussian>) {
          return "gauss(w=" + std::to_string(f.width) + ")";
        } else {
          std::string s;
          for (std::size_t i = 0; i < f.exponents.size(); ++i) {
            if (f.exponents[i] == 0) continue;
            if (!s.empty()) s += "*";
            s += "z" + std::to_string(i + 1);
            if (f.exponents[i] > 1) s += "^" + std::to_string(f.exponents[i]);
          }
          return s.empty() ? "1" : s;
        }
      },
      p);
}

/// Ordered basis b(z) = [phi_1(z) ... phi_k(z)]^T over R^n.
class BasisSet {
 public:
  BasisSet(int n, std::vector<BasisPrimitive> functions)
      : n_(n), functions_(std::move(functions)) {
    if (n_ < 1) throw ShapeError("basis dimension must be >= 1");
    if (functions_.empty()) throw ShapeError("basis must contain at least one function");
    for (const auto& p : functions_) validate(p);
  }

  [[nodiscard]] int input_dim() const { return n_; }
  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(functions_.size()); }
  [[nodiscard]] const std::vector<BasisPrimitive>& functions() const { return functions_; }
  [[nodiscard]] const BasisPrimitive& operator[](Eigen::Index j) const {
    return functions_[static_cast<std::size_t>(j)];
  }

  [[nodiscard]] Vector eval(const Vector& z) const {
    check_dim(z);
    Vector b(size());
    for (Eigen::Index j = 0; j < size(); ++j) b(j) = evaluate((*this)[j], z);
    return b;
  }

  /// n x k matrix [grad phi_1(z) ... grad phi_k(z)].
  [[nodiscard]] Matrix jacobian(const Vector& z) const {
    check_dim(z);
    Matrix jac(n_, size());
    for (Eigen::Index j = 0; j < size(); ++j) jac.col(j) = gradient((*this)[j], z);
    return jac;
  }

  [[nodiscard]] Matrix hessian(Eigen::Index j, const Vector& z) const {
    check_dim(z);
    return cautious::hessian((*this)[j], z);
  }

  [[nodiscard]] ConvexityClass convexity(Eigen::Index j) const {
    return convexity_class((*this)[j]);
  }

 private:
  void check_dim(const Vector& z) const {
    if (z.size() != n_) {
      throw ShapeError("basis expects points of dimension " + std::to_string(n_) + ", got " +
                       std::to_string(z.size()));
    }
  }

  void validate(const BasisPrimitive& p) const {
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, basis::Coordinate>) {
            if (f.index < 0 || f.index >= n_) throw ShapeError("coordinate index out of range");
          } else if constexpr (std::is_same_v<T, basis::Monomial>) {
            if (static_cast<int>(f.exponents.size()) != n_) {
              throw ShapeError("monomial exponent vector must have length n");
            }
            for (const int e : f.exponents) {
              if (e < 0) throw ShapeError("monomial exponents must be nonnegative");
            }
          } else if constexpr (std::is_same_v<T, basis::Gaussian>) {
            if (f.center.size() != n_) throw ShapeError("gaussian center must have length n");
            if (!(f.width > 0.0)) throw ShapeError("gaussian width must be positive");
          }
        },
        p);
  }

  int n_;
  std::vector<BasisPrimitive> functions_;
};

/// The quadratic test basis {1, z_1, ..., z_n, z^T z}.
inline BasisSet quadratic_basis(int n) {
  std::vector<BasisPrimitive> fs{basis::Constant{}};
  for (int i = 0; i < n; ++i) fs.emplace_back(basis::Coordinate{i});
  fs.emplace_back(basis::SquaredNorm{});
  return BasisSet(n, std::move(fs));
}

}  // namespace cautious
