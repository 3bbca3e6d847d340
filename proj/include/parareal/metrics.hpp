#pragma once

#include "parareal/engine.hpp"
#include "parareal/integrators.hpp"
#include "parareal/systems.hpp"
#include "parareal/tableau.hpp"
#include "parareal/trajectory.hpp"
#include "parareal/types.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace parareal {

/// W1 between two empirical distributions on the line, as the L1 distance of
/// their quantile functions.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("wasserstein1: empty sample set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  if (m == n) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(m);
  }
  // Walk the merged breakpoints i/m and j/n; both quantiles are constant in between.
  // Positions are compared as i*n vs j*m to stay exact in integers.
  double s = 0.0;
  std::size_t i = 0, j = 0;
  std::size_t pos = 0;  // current position in units of 1/(m*n)
  const std::size_t total = m * n;
  while (pos < total) {
    const std::size_t next_a = (i + 1) * n;
    const std::size_t next_b = (j + 1) * m;
    const std::size_t next = std::min(next_a, next_b);
    s += static_cast<double>(next - pos) * std::abs(a[i] - b[j]);
    pos = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return s / static_cast<double>(total);
}

enum class W1Mode { per_coordinate_mean, first_coordinate };

inline W1Mode parse_w1_mode(const std::string& s) {
  if (s == "per-coordinate-mean") return W1Mode::per_coordinate_mean;
  if (s == "first-coordinate") return W1Mode::first_coordinate;
  throw ConfigError("unknown w1 mode '" + s + "' (expected per-coordinate-mean | first-coordinate)");
}

inline std::string to_string(W1Mode m) {
  return m == W1Mode::per_coordinate_mean ? "per-coordinate-mean" : "first-coordinate";
}

/// W1 between the interface samples U_1..U_N of two trajectories, scalarized
/// over coordinates according to `mode`.
inline double trajectory_w1(const TrajectoryVec& U, const TrajectoryVec& ref,
                            W1Mode mode = W1Mode::per_coordinate_mean) {
  require_same_shape(U, ref, "trajectory_w1");
  if (U.N() < 1) throw ShapeError("trajectory_w1: need at least one chunk");
  const Eigen::Index d = U.dim();
  const Eigen::Index coords = mode == W1Mode::first_coordinate ? 1 : d;
  double acc = 0.0;
  for (Eigen::Index c = 0; c < coords; ++c) {
    std::vector<double> a, b;
    a.reserve(static_cast<std::size_t>(U.N()));
    b.reserve(static_cast<std::size_t>(U.N()));
    for (long n = 1; n <= U.N(); ++n) {
      a.push_back(U[n][c]);
      b.push_back(ref[n][c]);
    }
    acc += wasserstein1(std::move(a), std::move(b));
  }
  return acc / static_cast<double>(coords);
}

/// Algorithmic speedup with a fine chunk costing 1 and a coarse sweep N/xi.
inline double speedup_model(long N, long K, long xi) {
  if (N < 1 || K < 1 || xi < 1) throw ConfigError("speedup_model: need N, K, xi >= 1");
  const double n = static_cast<double>(N);
  return n / (static_cast<double>(K) * (1.0 + n / static_cast<double>(xi)));
}

struct LyapunovOptions {
  double spinup = 50.0;
  double horizon = 1000.0;
  double renorm_interval = 1.0;
  double h = 1e-2;
  std::string tableau = "rk4";
};

/// Leading Lyapunov exponent by Benettin renormalization of one tangent vector
/// propagated through the exact derivative of the discrete scheme.
inline double lyapunov_estimate(const OdeSystem& sys, const StateVec& u0, const LyapunovOptions& opt = {}) {
  if (!(opt.h > 0.0) || !(opt.renorm_interval > 0.0) || !(opt.horizon > 0.0) || opt.spinup < 0.0) {
    throw ConfigError("lyapunov_estimate: need h, renorm_interval, horizon > 0 and spinup >= 0");
  }
  if (opt.horizon < opt.renorm_interval) {
    throw ConfigError("lyapunov_estimate: horizon must be at least one renorm interval");
  }
  if (static_cast<std::size_t>(u0.size()) != sys.dim) throw ConfigError("lyapunov_estimate: u0 dimension");
  const ButcherTableau tab = make_tableau(opt.tableau);
  const long steps_per = std::max(1L, std::lround(opt.renorm_interval / opt.h));
  const double interval = static_cast<double>(steps_per) * opt.h;
  const long intervals = std::max(1L, std::lround(opt.horizon / interval));
  const long spin_steps = std::lround(opt.spinup / opt.h);

  StateVec u = u0;
  double t = 0.0;
  if (spin_steps > 0) {
    u = propagate(Propagator{tab, opt.h, spin_steps, {}}, sys, t, u);
    t = static_cast<double>(spin_steps) * opt.h;
  }

  const Propagator chunk{tab, opt.h, steps_per, {}};
  const auto d = static_cast<Eigen::Index>(sys.dim);
  Matrix v = Matrix::Constant(d, 1, 1.0 / std::sqrt(static_cast<double>(d)));
  double sum_log = 0.0;
  for (long k = 0; k < intervals; ++k) {
    u = detail::propagate_impl(chunk, sys, t, u, &v);
    t += interval;
    const double g = v.norm();
    if (!(g > 0.0) || !std::isfinite(g)) throw NumericalError("lyapunov_estimate: degenerate tangent vector");
    sum_log += std::log(g);
    v /= g;
  }
  return sum_log / (static_cast<double>(intervals) * interval);
}

struct AxisSpec {
  int coord = 0;
  double lo = 0.0;
  double hi = 1.0;
  int resolution = 2;

  double at(int k) const {
    return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(resolution - 1);
  }
};

/// Residual norms on a 2D slice; values(row, col) has row = index along the
/// j axis and col = index along the i axis.
struct BasinGrid {
  AxisSpec axis_i;
  AxisSpec axis_j;
  Matrix values;
};

/// Scans |U_n - F(U_prev)| over a 2D cross-section. Coordinates other than
/// coord_i, coord_j are held at F(U_prev).
inline BasinGrid basin_scan(const OdeSystem& sys, const Propagator& fine, double t0,
                            const StateVec& U_prev, const AxisSpec& ai, const AxisSpec& aj) {
  const auto d = static_cast<int>(sys.dim);
  if (ai.coord < 0 || ai.coord >= d || aj.coord < 0 || aj.coord >= d || ai.coord == aj.coord) {
    throw ConfigError("basin_scan: coordinates must be distinct and in [0, d)");
  }
  if (ai.resolution < 2 || aj.resolution < 2) throw ConfigError("basin_scan: resolution must be >= 2");
  if (!(ai.hi > ai.lo) || !(aj.hi > aj.lo)) throw ConfigError("basin_scan: empty axis range");
  const StateVec target = propagate(fine, sys, t0, U_prev);
  BasinGrid g{ai, aj, Matrix(aj.resolution, ai.resolution)};
  for (int r = 0; r < aj.resolution; ++r) {
    for (int c = 0; c < ai.resolution; ++c) {
      StateVec cand = target;
      cand[ai.coord] = ai.at(c);
      cand[aj.coord] = aj.at(r);
      g.values(r, c) = (cand - target).norm();
    }
  }
  return g;
}

/// Header line followed by one text row per j value, 6 significant digits.
inline void write_basin(std::ostream& os, const BasinGrid& g) {
  os << std::setprecision(6);
  os << "# basin coord_i=" << g.axis_i.coord << " i_lo=" << g.axis_i.lo << " i_hi=" << g.axis_i.hi
     << " nx=" << g.axis_i.resolution << " coord_j=" << g.axis_j.coord << " j_lo=" << g.axis_j.lo
     << " j_hi=" << g.axis_j.hi << " ny=" << g.axis_j.resolution << "\n";
  for (Eigen::Index r = 0; r < g.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.values.cols(); ++c) {
      if (c) os << ' ';
      os << g.values(r, c);
    }
    os << '\n';
  }
}

inline BasinGrid read_basin(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("# basin", 0) != 0) {
    throw ConfigError("read_basin: missing '# basin' header");
  }
  BasinGrid g;
  std::istringstream hs(header.substr(7));
  std::string tok;
  int seen = 0;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("read_basin: bad header token '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const double val = std::stod(tok.substr(eq + 1));
    if (key == "coord_i") g.axis_i.coord = static_cast<int>(val);
    else if (key == "i_lo") g.axis_i.lo = val;
    else if (key == "i_hi") g.axis_i.hi = val;
    else if (key == "nx") g.axis_i.resolution = static_cast<int>(val);
    else if (key == "coord_j") g.axis_j.coord = static_cast<int>(val);
    else if (key == "j_lo") g.axis_j.lo = val;
    else if (key == "j_hi") g.axis_j.hi = val;
    else if (key == "ny") g.axis_j.resolution = static_cast<int>(val);
    else throw ConfigError("read_basin: unknown header key '" + key + "'");
    ++seen;
  }
  if (seen != 8 || g.axis_i.resolution < 1 || g.axis_j.resolution < 1) {
    throw ConfigError("read_basin: incomplete header");
  }
  g.values.resize(g.axis_j.resolution, g.axis_i.resolution);
  for (Eigen::Index r = 0; r < g.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.values.cols(); ++c) {
      if (!(is >> g.values(r, c))) throw ConfigError("read_basin: truncated value matrix");
    }
  }
  return g;
}

struct MetricsReport {
  long K = 0;
  double S = 0.0;
  double serial_work = 0.0;
  double W1 = 0.0;
  double error_l2 = 0.0;
};

/// Metrics of a finished run. Requires the run to carry its fine reference.
inline MetricsReport compute_metrics(const RunReport& run, const GridSpec& grid,
                                     W1Mode mode = W1Mode::per_coordinate_mean) {
  if (!run.fine_reference) throw ConfigError("compute_metrics: run has no fine reference");
  MetricsReport m;
  m.K = run.K;
  m.S = speedup_model(grid.N, std::max(1L, run.K), grid.xi);
  m.serial_work = static_cast<double>(run.K) * grid.dT;
  m.W1 = trajectory_w1(run.final_iterate, *run.fine_reference, mode);
  m.error_l2 = distance_l2(run.final_iterate, *run.fine_reference);
  return m;
}

}  // namespace parareal
