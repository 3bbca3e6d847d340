#pragma once

#include "parareal/systems.hpp"
#include "parareal/tableau.hpp"
#include "parareal/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace parareal {

/// Newton settings for implicit stage equations.
struct NewtonControls {
  /// Stage-residual infinity-norm tolerance, scaled by max(1, |u|_inf).
  double tol = 1e-14;
  int max_iter = 50;
};

namespace detail {

// One RK step. When `sens` is non-null it holds du/du0 on entry and is
// advanced by the exact derivative of this step. The state arithmetic does not
// depend on whether `sens` is supplied.
inline StateVec rk_step_impl(const ButcherTableau& tab, const OdeSystem& sys, double t,
                             const StateVec& u, double h, Matrix* sens,
                             const NewtonControls& newton) {
  if (!(h >= 0.0) || !std::isfinite(h)) {
    throw ConfigError("rk_step: step size must be finite and non-negative");
  }
  const Eigen::Index s = tab.stages();
  const Eigen::Index d = u.size();
  std::vector<StateVec> k(static_cast<std::size_t>(s));

  if (tab.is_explicit()) {
    std::vector<Matrix> dk;
    if (sens) dk.resize(static_cast<std::size_t>(s));
    for (Eigen::Index i = 0; i < s; ++i) {
      StateVec z = u;
      for (Eigen::Index j = 0; j < i; ++j) {
        if (tab.A(i, j) != 0.0) z += (h * tab.A(i, j)) * k[j];
      }
      const double ti = t + tab.c[i] * h;
      k[i] = sys.rhs(ti, z);
      if (sens) {
        Matrix dz = *sens;
        for (Eigen::Index j = 0; j < i; ++j) {
          if (tab.A(i, j) != 0.0) dz += (h * tab.A(i, j)) * dk[j];
        }
        dk[i] = sys.jac(ti, z) * dz;
      }
    }
    StateVec next = u;
    for (Eigen::Index i = 0; i < s; ++i) next += (h * tab.b[i]) * k[i];
    if (sens) {
      Matrix ds = *sens;
      for (Eigen::Index i = 0; i < s; ++i) ds += (h * tab.b[i]) * dk[i];
      *sens = std::move(ds);
    }
    return next;
  }

  // Implicit: solve Z_i = u + h sum_j a_ij f(t_j, Z_j) for the stage states.
  const double scale = std::max(1.0, u.lpNorm<Eigen::Infinity>());
  Eigen::VectorXd z(s * d);
  for (Eigen::Index i = 0; i < s; ++i) z.segment(i * d, d) = u;

  std::vector<Matrix> jz(static_cast<std::size_t>(s));
  Eigen::VectorXd residual(s * d);
  Matrix newton_matrix(s * d, s * d);
  double res_norm = 0.0;
  bool converged = false;
  for (int it = 0; it <= newton.max_iter; ++it) {
    for (Eigen::Index j = 0; j < s; ++j) {
      k[j] = sys.rhs(t + tab.c[j] * h, z.segment(j * d, d));
    }
    for (Eigen::Index i = 0; i < s; ++i) {
      StateVec r = z.segment(i * d, d) - u;
      for (Eigen::Index j = 0; j < s; ++j) {
        if (tab.A(i, j) != 0.0) r -= (h * tab.A(i, j)) * k[j];
      }
      residual.segment(i * d, d) = r;
    }
    res_norm = residual.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res_norm)) break;
    if (res_norm <= newton.tol * scale) {
      converged = true;
      break;
    }
    if (it == newton.max_iter) break;

    for (Eigen::Index j = 0; j < s; ++j) {
      jz[j] = sys.jac(t + tab.c[j] * h, z.segment(j * d, d));
    }
    newton_matrix.setIdentity();
    for (Eigen::Index i = 0; i < s; ++i)
      for (Eigen::Index j = 0; j < s; ++j)
        if (tab.A(i, j) != 0.0)
          newton_matrix.block(i * d, j * d, d, d) -= (h * tab.A(i, j)) * jz[j];
    const Eigen::VectorXd delta = newton_matrix.partialPivLu().solve(-residual);
    z += delta;
    // An update at the roundoff floor means the residual cannot shrink further.
    if (delta.lpNorm<Eigen::Infinity>() <= 4.0 * 2.220446049250313e-16 * scale) {
      for (Eigen::Index j = 0; j < s; ++j) {
        k[j] = sys.rhs(t + tab.c[j] * h, z.segment(j * d, d));
      }
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw StepFailure("rk_step: Newton iteration on stage equations did not converge (residual " +
                          std::to_string(res_norm) + ")",
                      res_norm);
  }

  StateVec next = u;
  for (Eigen::Index i = 0; i < s; ++i) next += (h * tab.b[i]) * k[i];

  if (sens) {
    for (Eigen::Index j = 0; j < s; ++j) {
      jz[j] = sys.jac(t + tab.c[j] * h, z.segment(j * d, d));
    }
    newton_matrix.setIdentity();
    for (Eigen::Index i = 0; i < s; ++i)
      for (Eigen::Index j = 0; j < s; ++j)
        if (tab.A(i, j) != 0.0)
          newton_matrix.block(i * d, j * d, d, d) -= (h * tab.A(i, j)) * jz[j];
    Matrix rhs(s * d, sens->cols());
    for (Eigen::Index i = 0; i < s; ++i) rhs.middleRows(i * d, d) = *sens;
    const Matrix dz = newton_matrix.partialPivLu().solve(rhs);
    Matrix ds = *sens;
    for (Eigen::Index j = 0; j < s; ++j) {
      ds += (h * tab.b[j]) * (jz[j] * dz.middleRows(j * d, d));
    }
    *sens = std::move(ds);
  }
  return next;
}

}  // namespace detail

/// One step of the given tableau from (t, u) with step h.
inline StateVec rk_step(const ButcherTableau& tab, const OdeSystem& sys, double t,
                        const StateVec& u, double h, const NewtonControls& newton = {}) {
  return detail::rk_step_impl(tab, sys, t, u, h, nullptr, newton);
}

/// A fixed-step solver over one time chunk: `steps_per_call` steps of size `step`.
struct Propagator {
  ButcherTableau tableau;
  double step = 0.0;
  long steps_per_call = 1;
  NewtonControls newton{};

  double span() const { return step * static_cast<double>(steps_per_call); }
};

/// Uniform time grid. dT = T / N = L * xi * h.
struct GridSpec {
  double T = 0.0;
  long N = 1;
  double dT = 0.0;
  long xi = 1;
  long L = 1;
  double h = 0.0;

  double chunk_start(long n) const { return static_cast<double>(n) * dT; }

  /// Fine propagator: L*xi steps of size h.
  Propagator fine(const ButcherTableau& tab) const {
    return Propagator{tab, h, L * xi, {}};
  }
  /// Coarse propagator: L steps of size xi*h.
  Propagator coarse(const ButcherTableau& tab) const {
    return Propagator{tab, static_cast<double>(xi) * h, L, {}};
  }
};

/// Grid from total time, chunk count, coarsening ratio and coarse steps per chunk.
inline GridSpec make_grid(double T, long N, long xi, long L) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("grid: T must be positive");
  if (N < 1) throw ConfigError("grid: N must be >= 1");
  if (xi < 1) throw ConfigError("grid: xi must be >= 1");
  if (L < 1) throw ConfigError("grid: L must be >= 1");
  GridSpec g;
  g.T = T;
  g.N = N;
  g.dT = T / static_cast<double>(N);
  g.xi = xi;
  g.L = L;
  g.h = g.dT / static_cast<double>(L * xi);
  return g;
}

/// Grid from total time, chunk count, coarsening ratio and fine step; L is
/// derived and must come out integral.
inline GridSpec make_grid_from_step(double T, long N, long xi, double h) {
  if (!(h > 0.0)) throw ConfigError("grid: h must be positive");
  if (N < 1) throw ConfigError("grid: N must be >= 1");
  if (xi < 1) throw ConfigError("grid: xi must be >= 1");
  const double dT = T / static_cast<double>(N);
  const double l_real = dT / (static_cast<double>(xi) * h);
  const long L = std::lround(l_real);
  if (L < 1 || std::abs(l_real - static_cast<double>(L)) > 1e-8 * std::max(1.0, l_real)) {
    throw ConfigError("grid: dT = T/N = " + std::to_string(dT) +
                      " is not an integer multiple of xi*h = " +
                      std::to_string(static_cast<double>(xi) * h));
  }
  GridSpec g = make_grid(T, N, xi, L);
  g.h = h;
  return g;
}

namespace detail {

inline StateVec propagate_impl(const Propagator& prop, const OdeSystem& sys, double t0,
                               const StateVec& u, Matrix* sens) {
  if (prop.steps_per_call < 1) throw ConfigError("propagate: steps_per_call must be >= 1");
  StateVec x = u;
  for (long k = 0; k < prop.steps_per_call; ++k) {
    const double t = t0 + static_cast<double>(k) * prop.step;
    x = rk_step_impl(prop.tableau, sys, t, x, prop.step, sens, prop.newton);
    if (!x.allFinite()) {
      throw BlowUp("propagate: non-finite state after step " + std::to_string(k),
                   static_cast<std::size_t>(k));
    }
  }
  return x;
}

}  // namespace detail

/// Applies the propagator's steps over one chunk starting at t0.
inline StateVec propagate(const Propagator& prop, const OdeSystem& sys, double t0,
                          const StateVec& u) {
  return detail::propagate_impl(prop, sys, t0, u, nullptr);
}

struct StateAndJacobian {
  StateVec state;
  Matrix jacobian;
};

/// Chunk output plus the exact Jacobian of the discrete chunk map, obtained by
/// differentiating every stage alongside the state.
inline StateAndJacobian propagate_with_jacobian(const Propagator& prop, const OdeSystem& sys,
                                                double t0, const StateVec& u) {
  Matrix sens = Matrix::Identity(u.size(), u.size());
  StateVec out = detail::propagate_impl(prop, sys, t0, u, &sens);
  return {std::move(out), std::move(sens)};
}

}  // namespace parareal
