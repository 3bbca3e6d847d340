#pragma once

#include "parareal/integrators.hpp"
#include "parareal/linalg.hpp"
#include "parareal/systems.hpp"
#include "parareal/trajectory.hpp"
#include "parareal/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace parareal {

/// A state on a trajectory together with its time.
struct TimedState {
  double t = 0.0;
  StateVec u;
};

/// Interface states of a trajectory, tagged with chunk start times.
inline std::vector<TimedState> interface_samples(const TrajectoryVec& U, const GridSpec& grid) {
  std::vector<TimedState> out;
  out.reserve(U.states.size());
  for (long n = 0; n <= U.N(); ++n) out.push_back({grid.chunk_start(n), U[n]});
  return out;
}

/// Every `stride`-th step of `prop` from (t0, u0), `count` samples including
/// the start. Used to resolve mu and nu along a trajectory.
inline std::vector<TimedState> dense_samples(const ButcherTableau& tab, const OdeSystem& sys,
                                             double t0, const StateVec& u0, double h, long count,
                                             long stride = 1) {
  if (count < 1 || stride < 1 || !(h > 0.0)) throw ConfigError("dense_samples: bad arguments");
  std::vector<TimedState> out;
  out.reserve(static_cast<std::size_t>(count));
  Propagator p{tab, h, stride, {}};
  StateVec u = u0;
  double t = t0;
  out.push_back({t, u});
  for (long i = 1; i < count; ++i) {
    u = propagate(p, sys, t, u);
    t = t0 + static_cast<double>(i * stride) * h;
    out.push_back({t, u});
  }
  return out;
}

struct MuNu {
  double mu = 0.0;
  double nu = 0.0;
};

/// mu = max |J(t_i, u_i)|_2; nu = max over neighbours of
/// |J(t_{i+1}) - J(t_i)|_2 / (t_{i+1} - t_i).
inline MuNu estimate_mu_nu(const OdeSystem& sys, const std::vector<TimedState>& samples) {
  if (samples.size() < 2) throw ConfigError("estimate_mu_nu: need at least 2 samples");
  MuNu r;
  Matrix prev = sys.jac(samples[0].t, samples[0].u);
  r.mu = spectral_norm(prev);
  for (std::size_t i = 1; i < samples.size(); ++i) {
    Matrix cur = sys.jac(samples[i].t, samples[i].u);
    r.mu = std::max(r.mu, spectral_norm(cur));
    const double dt = samples[i].t - samples[i - 1].t;
    if (!(dt > 0.0)) throw ConfigError("estimate_mu_nu: sample times must increase");
    r.nu = std::max(r.nu, spectral_norm(cur - prev) / dt);
    prev = std::move(cur);
  }
  return r;
}

/// (g^N - 1) / (g - 1), with the limit N when |g - 1| < 1e-12.
inline double transport_term(double g_norm, long N) {
  if (g_norm < 0.0 || N < 1) throw ConfigError("transport_term: need g >= 0, N >= 1");
  const double n = static_cast<double>(N);
  if (std::abs(g_norm - 1.0) < 1e-12) return n;
  // Near g = 1 the direct quotient cancels badly; expm1/log1p keep it accurate.
  const double x = g_norm - 1.0;
  if (std::abs(x) < 1e-3) return std::expm1(n * std::log1p(x)) / x;
  return (std::pow(g_norm, n) - 1.0) / x;
}

struct JacobianSampleSup {
  double source = 0.0;  ///< max |DF - DG|_2
  double coarse = 0.0;  ///< max |DG|_2
};

/// Sups of the chunk-Jacobian discrepancy and of the coarse Jacobian over the
/// samples. The discrepancy is taken over all samples; the coarse norm skips
/// the first sample, matching the index ranges of the contraction factor.
inline JacobianSampleSup jacobian_sups(const Propagator& fine, const Propagator& coarse,
                                       const OdeSystem& sys, const std::vector<TimedState>& samples) {
  JacobianSampleSup r;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto f = propagate_with_jacobian(fine, sys, samples[i].t, samples[i].u);
    const auto g = propagate_with_jacobian(coarse, sys, samples[i].t, samples[i].u);
    r.source = std::max(r.source, spectral_norm(f.jacobian - g.jacobian));
    if (i > 0) r.coarse = std::max(r.coarse, spectral_norm(g.jacobian));
  }
  return r;
}

/// max over samples of |DF(u) - DG(u)|_2 with exact discrete chunk Jacobians.
inline double source_term_empirical(const Propagator& fine, const Propagator& coarse,
                                    const OdeSystem& sys, const std::vector<TimedState>& samples) {
  if (samples.empty()) throw ConfigError("source_term_empirical: no samples");
  return jacobian_sups(fine, coarse, sys, samples).source;
}

struct TheoreticalSource {
  double bound = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  double h_max = std::numeric_limits<double>::infinity();
  /// Set when h >= h_max, i.e. outside the regime where the bound holds.
  bool step_warning = false;
};

/// Leading-order bound L xi (h mu)^2 (C1 + C2 + C3) on |DF - DG| for
/// Runge-Kutta fine/coarse pairs, with its step-size limit.
inline TheoreticalSource source_term_theoretical(const ButcherTableau& tabF, const ButcherTableau& tabG,
                                                 double h, long xi, long L, double mu, double nu) {
  if (xi < 1 || L < 1 || !(h > 0.0) || mu < 0.0 || nu < 0.0) {
    throw ConfigError("source_term_theoretical: need h > 0, xi >= 1, L >= 1, mu, nu >= 0");
  }
  TheoreticalSource r;
  const double x = static_cast<double>(xi);
  const double l = static_cast<double>(L);
  const double a_max = std::max(tabF.norm_A(), x * tabG.norm_A());
  const auto sF = static_cast<double>(tabF.stages());
  const auto sG = static_cast<double>(tabG.stages());
  r.C1 = a_max * (sF * tabF.norm_b() * tabF.norm_c() + sG * tabG.norm_b() * tabG.norm_c());
  if (mu == 0.0) {
    // No Jacobian: both maps are the identity to all orders.
    r.C2 = (x - 1.0) / 2.0;
    r.bound = 0.0;
  } else {
    r.C2 = (x - 1.0) / 2.0 * (1.0 + nu / (mu * mu));
    r.h_max = a_max > 0.0 ? 1.0 / (mu * a_max) : std::numeric_limits<double>::infinity();
  }
  const double bcF = tabF.b_dot_c();
  const double bcG = tabG.b_dot_c();
  r.C3 = std::abs(1.0 + bcF) * (x - 1.0) + std::abs(bcF - bcG) * x * (l + 1.0);
  if (mu > 0.0) r.bound = l * x * (h * mu) * (h * mu) * (r.C1 + r.C2 + r.C3);
  r.step_warning = h >= r.h_max;
  return r;
}

/// The contraction factor beta = transport * source with its ingredients.
struct ContractionBound {
  double beta = 0.0;
  double transport = 0.0;
  double source = 0.0;
  double g_norm_sup = 0.0;
  double mu = 0.0;
  double nu = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  double h_max = std::numeric_limits<double>::infinity();
  double source_theoretical = 0.0;
  bool step_warning = false;
};

/// beta from sampled chunk Jacobians. mu and nu for the theoretical source
/// term come from `mu_nu` when supplied, otherwise from the samples.
inline ContractionBound beta_bound(const ButcherTableau& tabF, const ButcherTableau& tabG,
                                   const OdeSystem& sys, const GridSpec& grid,
                                   const std::vector<TimedState>& samples,
                                   std::optional<MuNu> mu_nu = std::nullopt) {
  if (samples.empty()) throw ConfigError("beta_bound: no samples");
  const Propagator fine = grid.fine(tabF);
  const Propagator coarse = grid.coarse(tabG);
  const auto sups = jacobian_sups(fine, coarse, sys, samples);

  ContractionBound b;
  b.g_norm_sup = sups.coarse;
  b.source = sups.source;
  b.transport = transport_term(b.g_norm_sup, grid.N);
  b.beta = b.transport * b.source;

  const MuNu mn = mu_nu ? *mu_nu
                        : (samples.size() >= 2 ? estimate_mu_nu(sys, samples)
                                               : MuNu{spectral_norm(sys.jac(samples[0].t, samples[0].u)), 0.0});
  b.mu = mn.mu;
  b.nu = mn.nu;
  const auto th = source_term_theoretical(tabF, tabG, grid.h, grid.xi, grid.L, b.mu, b.nu);
  b.C1 = th.C1;
  b.C2 = th.C2;
  b.C3 = th.C3;
  b.h_max = th.h_max;
  b.source_theoretical = th.bound;
  b.step_warning = th.step_warning;
  return b;
}

/// Outer radius R guaranteeing |U^K - U*| <= r after K iterations.
struct BallBudget {
  double r = 0.0;
  double R = 0.0;
  long K = 1;
  double q = 1.0;
  double beta = 0.0;
  /// beta >= 1 with linear convergence: the coarse guess must already be
  /// about as accurate as the target.
  bool slow_convergence = false;
};

inline BallBudget outer_ball_radius(double r, double beta, long K, double q = 1.0) {
  if (!(r > 0.0) || !(beta > 0.0) || K < 1 || !(q >= 1.0)) {
    throw ConfigError("outer_ball_radius: need r > 0, beta > 0, K >= 1, q >= 1");
  }
  BallBudget b{r, 0.0, K, q, beta, false};
  const double k = static_cast<double>(K);
  if (q == 1.0) {
    b.R = r / std::pow(beta, k);
    b.slow_convergence = beta >= 1.0;
    return b;
  }
  // Exponent (q^K - 1)/(q - 1) and 1/q^K, evaluated stably near q = 1.
  const double lq = std::log1p(q - 1.0);
  const double geometric = std::expm1(k * lq) / (q - 1.0);
  const double qk = std::exp(k * lq);
  b.R = std::exp((std::log(r) - geometric * std::log(beta)) / qk);
  return b;
}

struct OrderEstimate {
  double q_est = 0.0;
  std::vector<double> Q1;  ///< e_k / e_{k-1}
  std::vector<double> Q2;  ///< e_k / e_{k-1}^2
};

/// Least-squares slope of log e_k against log e_{k-1}, plus the Q-ratios.
/// Zero entries are dropped; at least three positive errors are required.
inline OrderEstimate empirical_order(const std::vector<double>& errors) {
  std::vector<double> e;
  for (double v : errors) {
    if (v > 0.0 && std::isfinite(v)) e.push_back(v);
  }
  if (e.size() < 3) throw DiagnosticUnavailable("empirical_order: fewer than 3 usable error values");
  OrderEstimate r;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double m = static_cast<double>(e.size() - 1);
  for (std::size_t k = 1; k < e.size(); ++k) {
    const double x = std::log(e[k - 1]);
    const double y = std::log(e[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    r.Q1.push_back(e[k] / e[k - 1]);
    r.Q2.push_back(e[k] / (e[k - 1] * e[k - 1]));
  }
  const double den = m * sxx - sx * sx;
  if (std::abs(den) <= 1e-300) throw DiagnosticUnavailable("empirical_order: degenerate error history");
  r.q_est = (m * sxy - sx * sy) / den;
  return r;
}

}  // namespace parareal
