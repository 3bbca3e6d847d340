#pragma once

#include "parareal/linalg.hpp"
#include "parareal/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace parareal {

/// Runge-Kutta coefficients (A, b, c) with order p.
struct ButcherTableau {
  std::string name;
  Matrix A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  int order = 0;

  Eigen::Index stages() const { return b.size(); }

  bool is_explicit() const {
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      for (Eigen::Index j = i; j < A.cols(); ++j)
        if (A(i, j) != 0.0) return false;
    return true;
  }

  /// Sum b_i = 1 and c_i = sum_j A_ij, to `tol`.
  bool is_consistent(double tol = 1e-14) const {
    if (std::abs(b.sum() - 1.0) > tol) return false;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      if (std::abs(A.row(i).sum() - c[i]) > tol) return false;
    return true;
  }

  double b_dot_c() const { return b.dot(c); }

  // Norms used by the contraction bounds: induced 2-norm for A,
  // Euclidean for b and c.
  double norm_A() const { return spectral_norm(A); }
  double norm_b() const { return b.norm(); }
  double norm_c() const { return c.norm(); }

  /// Scalar stability function R(z) = 1 + z b^T (I - z A)^{-1} 1.
  double stability(double z) const {
    const auto s = stages();
    const Matrix m = Matrix::Identity(s, s) - z * A;
    const Eigen::VectorXd k = m.partialPivLu().solve(Eigen::VectorXd::Ones(s));
    return 1.0 + z * b.dot(k);
  }
};

namespace detail {

inline ButcherTableau validated(ButcherTableau t) {
  const auto s = t.b.size();
  if (s == 0 || t.A.rows() != s || t.A.cols() != s || t.c.size() != s) {
    throw ConfigError("tableau '" + t.name + "': inconsistent stage dimensions");
  }
  if (!t.is_consistent(1e-12)) {
    throw ConfigError("tableau '" + t.name + "': violates sum(b)=1 or row-sum condition");
  }
  if (t.order < 1) throw ConfigError("tableau '" + t.name + "': order must be >= 1");
  return t;
}

}  // namespace detail

inline ButcherTableau implicit_euler() {
  ButcherTableau t;
  t.name = "implicit_euler";
  t.A = Matrix::Constant(1, 1, 1.0);
  t.b = Eigen::VectorXd::Constant(1, 1.0);
  t.c = Eigen::VectorXd::Constant(1, 1.0);
  t.order = 1;
  return t;
}

inline ButcherTableau explicit_euler() {
  ButcherTableau t;
  t.name = "explicit_euler";
  t.A = Matrix::Zero(1, 1);
  t.b = Eigen::VectorXd::Constant(1, 1.0);
  t.c = Eigen::VectorXd::Zero(1);
  t.order = 1;
  return t;
}

inline ButcherTableau rk4() {
  ButcherTableau t;
  t.name = "rk4";
  t.A = Matrix::Zero(4, 4);
  t.A(1, 0) = 0.5;
  t.A(2, 1) = 0.5;
  t.A(3, 2) = 1.0;
  t.b.resize(4);
  t.b << 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0;
  t.c.resize(4);
  t.c << 0.0, 0.5, 0.5, 1.0;
  t.order = 4;
  return t;
}

/// Two-stage Gauss-Legendre collocation, order 4 (fully implicit).
inline ButcherTableau gauss_legendre2() {
  const double r = std::sqrt(3.0) / 6.0;
  ButcherTableau t;
  t.name = "gauss2";
  t.A.resize(2, 2);
  t.A << 0.25, 0.25 - r, 0.25 + r, 0.25;
  t.b = Eigen::VectorXd::Constant(2, 0.5);
  t.c.resize(2);
  t.c << 0.5 - r, 0.5 + r;
  t.order = 4;
  return t;
}

inline std::vector<std::string> tableau_names() {
  return {"rk4", "implicit_euler", "explicit_euler", "gauss2"};
}

inline ButcherTableau make_tableau(const std::string& name) {
  if (name == "rk4") return detail::validated(rk4());
  if (name == "implicit_euler") return detail::validated(implicit_euler());
  if (name == "explicit_euler") return detail::validated(explicit_euler());
  if (name == "gauss2") return detail::validated(gauss_legendre2());
  throw ConfigError("unknown tableau '" + name +
                    "' (expected rk4 | implicit_euler | explicit_euler | gauss2)");
}

}  // namespace parareal
