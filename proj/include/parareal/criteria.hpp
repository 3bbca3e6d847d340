#pragma once

#include "parareal/trajectory.hpp"
#include "parareal/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace parareal {

enum class CheckKind { standard, proximity };
enum class WeightMode { unit, lyapunov, lipschitz_dynamic };

inline std::string to_string(CheckKind k) { return k == CheckKind::standard ? "standard" : "psi"; }

inline std::string to_string(WeightMode m) {
  switch (m) {
    case WeightMode::unit: return "unit";
    case WeightMode::lyapunov: return "lyapunov";
    case WeightMode::lipschitz_dynamic: return "lipschitz";
  }
  return "unit";
}

inline CheckKind parse_check_kind(const std::string& s) {
  if (s == "standard") return CheckKind::standard;
  if (s == "psi" || s == "proximity") return CheckKind::proximity;
  throw ConfigError("unknown check '" + s + "' (expected standard | psi)");
}

inline WeightMode parse_weight_mode(const std::string& s) {
  if (s == "unit") return WeightMode::unit;
  if (s == "lyapunov") return WeightMode::lyapunov;
  if (s == "lipschitz") return WeightMode::lipschitz_dynamic;
  throw ConfigError("unknown weight '" + s + "' (expected unit | lyapunov | lipschitz)");
}

/// A stopping rule. `w` is the base weight currently in force; the solve loop
/// refreshes it in lipschitz_dynamic mode.
struct StopCriterion {
  CheckKind kind = CheckKind::standard;
  double eps = 1e-9;
  WeightMode weight_mode = WeightMode::unit;
  double w = 1.0;
  std::optional<double> lambda;
};

/// psi(U) = (1/N) sum_{n=1}^N w^{-n} |U_n - F(U_{n-1})|_2, where
/// fine_values[n-1] = F(U_{n-1}). Summed in ascending n.
inline double proximity(const TrajectoryVec& U, const std::vector<StateVec>& fine_values, double w) {
  const long N = U.N();
  if (N < 1 || static_cast<long>(fine_values.size()) != N) {
    throw ShapeError("proximity: expected " + std::to_string(N) + " fine values, got " +
                     std::to_string(fine_values.size()));
  }
  if (!(w > 0.0)) throw ConfigError("proximity: weight must be positive");
  double sum = 0.0;
  for (long n = 1; n <= N; ++n) {
    const auto& f = fine_values[static_cast<std::size_t>(n - 1)];
    if (f.size() != U[n].size()) throw ShapeError("proximity: state dimension mismatch");
    sum += std::pow(w, -static_cast<double>(n)) * (U[n] - f).norm();
  }
  return sum / static_cast<double>(N);
}

/// Secant estimate of the fine chunk map's Lipschitz constant, merged with the
/// running estimate `prev` and floored at 1. Pairs whose states coincide
/// (|dU| < 1e-14) are skipped.
inline double update_lipschitz(double prev, const TrajectoryVec& U_curr, const TrajectoryVec& U_prev,
                               const std::vector<StateVec>& fine_curr,
                               const std::vector<StateVec>& fine_prev) {
  require_same_shape(U_curr, U_prev, "update_lipschitz");
  const std::size_t pairs = std::min(fine_curr.size(), fine_prev.size());
  if (pairs > static_cast<std::size_t>(U_curr.N() + 1)) {
    throw ShapeError("update_lipschitz: more fine values than states");
  }
  double est = prev;
  for (std::size_t n = 0; n < pairs; ++n) {
    const double den = (U_curr[static_cast<long>(n)] - U_prev[static_cast<long>(n)]).norm();
    if (den < 1e-14) continue;
    const double num = (fine_curr[n] - fine_prev[n]).norm();
    est = std::max(est, num / den);
  }
  return std::max(est, 1.0);
}

/// Base weight for a mode. Lyapunov mode requires lambda.
inline double base_weight(WeightMode mode, std::optional<double> lambda, double dT,
                          double current_lipschitz) {
  switch (mode) {
    case WeightMode::unit: return 1.0;
    case WeightMode::lyapunov:
      if (!lambda) throw ConfigError("weight mode 'lyapunov' requires a lambda value");
      return std::exp(*lambda * dT);
    case WeightMode::lipschitz_dynamic: return std::max(1.0, current_lipschitz);
  }
  return 1.0;
}

/// ( sum_{n=1}^N w^{-n} |U_n - ref_n|_p^p )^{1/p}. U_0 is excluded.
inline double weighted_norm(const TrajectoryVec& U, const TrajectoryVec& ref, double w, double p = 2.0) {
  require_same_shape(U, ref, "weighted_norm");
  if (!(p >= 1.0)) throw ConfigError("weighted_norm: p must be >= 1");
  double sum = 0.0;
  for (long n = 1; n <= U.N(); ++n) {
    const StateVec diff = U[n] - ref[n];
    double np = 0.0;
    for (Eigen::Index i = 0; i < diff.size(); ++i) np += std::pow(std::abs(diff[i]), p);
    sum += std::pow(w, -static_cast<double>(n)) * np;
  }
  return std::pow(sum, 1.0 / p);
}

/// Constants of the sandwich c psi(U) <= |U - U*|_W <= C psi(U).
struct NormEquivalence {
  double theta = 0.0;
  double c_lower = 0.0;
  double C_upper = 0.0;
  long N = 1;

  enum class Regime { stable, critical, unstable };
  Regime regime() const {
    if (std::abs(theta - 1.0) < 1e-12) return Regime::critical;
    return theta < 1.0 ? Regime::stable : Regime::unstable;
  }
};

inline NormEquivalence equivalence_constants(double lipschitz_F, double w, long N) {
  if (!(lipschitz_F > 0.0) || !(w > 0.0) || N < 1) {
    throw ConfigError("equivalence_constants: need Lambda_F > 0, w > 0, N >= 1");
  }
  NormEquivalence e;
  e.theta = lipschitz_F / w;
  e.N = N;
  e.c_lower = 1.0 / (1.0 + e.theta);
  const double n = static_cast<double>(N);
  if (std::abs(e.theta - 1.0) < 1e-12) {
    e.C_upper = n * n;
  } else {
    e.C_upper = n * (std::pow(e.theta, n) - 1.0) / (e.theta - 1.0);
  }
  return e;
}

/// max_n |U_n - P_n| / |P_n| over chunks with |P_n| >= 1e-300.
inline double relative_residual(const TrajectoryVec& U_curr, const TrajectoryVec& U_prev) {
  require_same_shape(U_curr, U_prev, "relative_residual");
  double worst = 0.0;
  for (long n = 0; n <= U_curr.N(); ++n) {
    const double den = U_prev[n].norm();
    if (den < 1e-300) continue;
    worst = std::max(worst, (U_curr[n] - U_prev[n]).norm() / den);
  }
  return worst;
}

struct CheckResult {
  bool fired = false;
  double value = 0.0;
};

/// Evaluates the criterion for one iteration. The standard check compares the
/// new iterate against the previous one; the proximity check scores the
/// previous iterate through its jumps, using fine_prev_values = F(U_prev).
inline CheckResult check(const StopCriterion& crit, const TrajectoryVec& U_curr,
                         const TrajectoryVec& U_prev, const std::vector<StateVec>& fine_prev_values) {
  CheckResult r;
  if (crit.kind == CheckKind::standard) {
    r.value = relative_residual(U_curr, U_prev);
  } else {
    r.value = proximity(U_prev, fine_prev_values, crit.w);
  }
  r.fired = r.value < crit.eps;
  return r;
}

}  // namespace parareal
