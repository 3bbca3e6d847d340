#pragma once

#include "parareal/types.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>

namespace parareal {

/// An autonomous or time-dependent ODE u' = f(t, u) with an analytic Jacobian.
///
/// Instances are immutable after construction and may be shared freely
/// between threads.
struct OdeSystem {
  using Rhs = std::function<StateVec(double, const StateVec&)>;
  using Jac = std::function<Matrix(double, const StateVec&)>;

  std::string name;
  std::size_t dim = 0;
  std::map<std::string, double> params;
  Rhs rhs;
  Jac jac;
  /// Leading Lyapunov exponent per unit time, when known in closed form.
  std::optional<double> known_lambda;
  /// Conventional starting state used when a config does not override it.
  StateVec default_u0;
};

/// u' = u (1 - u)
inline OdeSystem make_logistic() {
  OdeSystem s;
  s.name = "logistic";
  s.dim = 1;
  s.rhs = [](double, const StateVec& u) {
    StateVec r(1);
    r[0] = u[0] * (1.0 - u[0]);
    return r;
  };
  s.jac = [](double, const StateVec& u) {
    Matrix j(1, 1);
    j(0, 0) = 1.0 - 2.0 * u[0];
    return j;
  };
  s.default_u0 = StateVec::Constant(1, 1e-3);
  return s;
}

inline OdeSystem make_lorenz63(double sigma = 10.0, double rho = 28.0,
                               double b = 8.0 / 3.0) {
  OdeSystem s;
  s.name = "lorenz63";
  s.dim = 3;
  s.params = {{"sigma", sigma}, {"rho", rho}, {"b", b}};
  s.rhs = [sigma, rho, b](double, const StateVec& u) {
    StateVec r(3);
    r[0] = sigma * (u[1] - u[0]);
    r[1] = u[0] * (rho - u[2]) - u[1];
    r[2] = u[0] * u[1] - b * u[2];
    return r;
  };
  s.jac = [sigma, rho, b](double, const StateVec& u) {
    Matrix j(3, 3);
    j << -sigma, sigma, 0.0,
         rho - u[2], -1.0, -u[0],
         u[1], u[0], -b;
    return j;
  };
  s.default_u0 = StateVec::Ones(3);
  return s;
}

/// x_i' = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F with cyclic indices.
inline OdeSystem make_lorenz96(int D = 40, double F = 8.0) {
  if (D < 4) {
    throw ConfigError("lorenz96: dimension D must be >= 4, got " +
                      std::to_string(D));
  }
  const auto n = static_cast<Eigen::Index>(D);
  // Neighbour index tables: columns are i+1, i-1, i-2 (mod D).
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, 3> nb(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    nb(i, 0) = (i + 1) % n;
    nb(i, 1) = (i + n - 1) % n;
    nb(i, 2) = (i + n - 2) % n;
  }

  OdeSystem s;
  s.name = "lorenz96";
  s.dim = static_cast<std::size_t>(D);
  s.params = {{"D", static_cast<double>(D)}, {"F", F}};
  s.rhs = [n, F, nb](double, const StateVec& x) {
    StateVec r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      r[i] = (x[nb(i, 0)] - x[nb(i, 2)]) * x[nb(i, 1)] - x[i] + F;
    }
    return r;
  };
  s.jac = [n, nb](double, const StateVec& x) {
    Matrix j = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      j(i, nb(i, 0)) += x[nb(i, 1)];
      j(i, nb(i, 2)) -= x[nb(i, 1)];
      j(i, nb(i, 1)) += x[nb(i, 0)] - x[nb(i, 2)];
      j(i, i) -= 1.0;
    }
    return j;
  };
  s.default_u0 = StateVec::Constant(n, F);
  s.default_u0[0] += 0.01;
  return s;
}

/// Constant-coefficient linear system u' = A u. Used by tests and by the
/// norm-equivalence checks where the chunk map is known exactly.
inline OdeSystem make_linear(Matrix a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw ConfigError("linear: coefficient matrix must be square and non-empty");
  }
  OdeSystem s;
  s.name = "linear";
  s.dim = static_cast<std::size_t>(a.rows());
  s.rhs = [a](double, const StateVec& u) -> StateVec { return a * u; };
  s.jac = [a](double, const StateVec&) -> Matrix { return a; };
  if (a.rows() == 1) {
    s.params = {{"a", a(0, 0)}};
    s.known_lambda = a(0, 0);
  }
  s.default_u0 = StateVec::Ones(a.rows());
  return s;
}

inline OdeSystem make_linear_scalar(double a) {
  return make_linear(Matrix::Constant(1, 1, a));
}

/// Builds a system by its config name, applying named parameter overrides.
inline OdeSystem make_system(const std::string& name,
                             const std::map<std::string, double>& overrides = {}) {
  auto get = [&](const char* key, double fallback) {
    auto it = overrides.find(key);
    return it == overrides.end() ? fallback : it->second;
  };
  auto reject_unknown = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : overrides) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) {
        throw ConfigError("system '" + name + "': unknown parameter '" + key + "'");
      }
    }
  };

  if (name == "logistic") {
    reject_unknown({});
    return make_logistic();
  }
  if (name == "lorenz63") {
    reject_unknown({"sigma", "rho", "b"});
    return make_lorenz63(get("sigma", 10.0), get("rho", 28.0), get("b", 8.0 / 3.0));
  }
  if (name == "lorenz96") {
    reject_unknown({"D", "F"});
    const double d = get("D", 40.0);
    if (d != static_cast<double>(static_cast<int>(d))) {
      throw ConfigError("lorenz96: D must be an integer");
    }
    return make_lorenz96(static_cast<int>(d), get("F", 8.0));
  }
  if (name == "linear") {
    reject_unknown({"a"});
    return make_linear_scalar(get("a", -1.0));
  }
  throw ConfigError("unknown system '" + name +
                    "' (expected logistic | lorenz63 | lorenz96 | linear)");
}

}  // namespace parareal
