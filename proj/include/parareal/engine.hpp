#pragma once

#include "parareal/criteria.hpp"
#include "parareal/integrators.hpp"
#include "parareal/systems.hpp"
#include "parareal/trajectory.hpp"
#include "parareal/types.hpp"

#include <algorithm>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace parareal {

namespace detail {

// Runs body(i) for i in [0, count) on up to `workers` threads. Every index is
// processed by exactly one thread and writes only its own output slot, so the
// result does not depend on the schedule. The exception of the lowest failing
// index is rethrown.
template <typename Body>
void parallel_for(long count, unsigned workers, Body&& body) {
  if (count <= 0) return;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  auto run = [&](unsigned worker) {
    for (long i = worker; i < count; i += workers) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs one chunk propagation and tags numerical failures with the chunk index.
inline StateVec propagate_chunk(const Propagator& prop, const OdeSystem& sys, const GridSpec& grid,
                                long chunk, const StateVec& u, const char* which) {
  try {
    return propagate(prop, sys, grid.chunk_start(chunk), u);
  } catch (const BlowUp& e) {
    throw BlowUp(std::string(which) + " solver, chunk " + std::to_string(chunk) + ": " + e.what(),
                 e.step(), chunk);
  } catch (const StepFailure& e) {
    throw StepFailure(std::string(which) + " solver, chunk " + std::to_string(chunk) + ": " +
                          e.what(),
                      e.residual());
  }
}

}  // namespace detail

/// U^0_0 = u0, U^0_n = G(U^0_{n-1}).
inline TrajectoryVec coarse_sweep(const Propagator& coarse, const OdeSystem& sys,
                                  const GridSpec& grid, const StateVec& u0) {
  TrajectoryVec U(grid.N, u0);
  for (long n = 1; n <= grid.N; ++n) {
    U[n] = detail::propagate_chunk(coarse, sys, grid, n - 1, U[n - 1], "coarse");
  }
  return U;
}

/// Serial fine solve U*_n = F(U*_{n-1}); the fixed point of the iteration.
inline TrajectoryVec fine_serial_reference(const Propagator& fine, const OdeSystem& sys,
                                           const GridSpec& grid, const StateVec& u0) {
  TrajectoryVec U(grid.N, u0);
  for (long n = 1; n <= grid.N; ++n) {
    U[n] = detail::propagate_chunk(fine, sys, grid, n - 1, U[n - 1], "fine");
  }
  return U;
}

struct IterateResult {
  TrajectoryVec next;
  /// fine_values[n-1] = F(U_prev_{n-1}).
  std::vector<StateVec> fine_values;
  /// coarse_values[n-1] = G(next_{n-1}); feeds the following iteration.
  std::vector<StateVec> coarse_values;
};

/// One Parareal iteration
///   U^k_n = F(U^{k-1}_{n-1}) + [G(U^k_{n-1}) - G(U^{k-1}_{n-1})].
/// The fine propagations are chunk-parallel; the correction sweep is serial.
/// `coarse_prev` holds G(U_prev_{n-1}) from the previous sweep and is
/// recomputed when empty. The bracketed difference is evaluated first so that
/// chunks whose input is unchanged reproduce the fine value bit for bit.
inline IterateResult parareal_iterate(const TrajectoryVec& U_prev, const Propagator& fine,
                                      const Propagator& coarse, const OdeSystem& sys,
                                      const GridSpec& grid,
                                      const std::vector<StateVec>& coarse_prev = {},
                                      unsigned workers = detail::default_workers()) {
  const long N = grid.N;
  if (U_prev.N() != N) throw ShapeError("parareal_iterate: trajectory has wrong chunk count");

  IterateResult r;
  r.fine_values.resize(static_cast<std::size_t>(N));
  detail::parallel_for(N, workers, [&](long i) {
    r.fine_values[static_cast<std::size_t>(i)] =
        detail::propagate_chunk(fine, sys, grid, i, U_prev[i], "fine");
  });

  std::vector<StateVec> g_old;
  const std::vector<StateVec>* g_prev = &coarse_prev;
  if (static_cast<long>(coarse_prev.size()) != N) {
    g_old.resize(static_cast<std::size_t>(N));
    detail::parallel_for(N, workers, [&](long i) {
      g_old[static_cast<std::size_t>(i)] =
          detail::propagate_chunk(coarse, sys, grid, i, U_prev[i], "coarse");
    });
    g_prev = &g_old;
  }

  r.next = TrajectoryVec(N, U_prev[0]);
  r.coarse_values.resize(static_cast<std::size_t>(N));
  for (long n = 1; n <= N; ++n) {
    const auto idx = static_cast<std::size_t>(n - 1);
    StateVec g_new = detail::propagate_chunk(coarse, sys, grid, n - 1, r.next[n - 1], "coarse");
    r.next[n] = r.fine_values[idx] + (g_new - (*g_prev)[idx]);
    r.coarse_values[idx] = std::move(g_new);
  }
  return r;
}

/// Fully resolved inputs of one Parareal solve.
struct SolveSetup {
  OdeSystem system;
  ButcherTableau fine_tableau;
  ButcherTableau coarse_tableau;
  GridSpec grid;
  StateVec u0;
  StopCriterion criterion;
  bool keep_iterates = false;
  bool compute_reference = true;
  /// Optional cap below N; the finite-termination cap N always applies.
  std::optional<long> max_iterations;
  unsigned workers = detail::default_workers();
};

struct RunReport {
  long K = 0;
  bool converged = false;
  /// Stopped because K reached N, where the iterate equals U* by finite
  /// termination, rather than by the criterion firing.
  bool terminated_by_cap = false;
  /// Snapshots U^0 ... U^K; filled only when keep_iterates is set.
  std::vector<TrajectoryVec> iterates;
  TrajectoryVec final_iterate;
  std::vector<double> residual_history;
  std::vector<double> lipschitz_history;
  std::vector<double> weight_history;
  std::optional<TrajectoryVec> fine_reference;
};

/// Coarse sweep followed by Parareal iterations until the criterion fires or
/// K = N. At iteration k the standard check compares U^k with U^{k-1}; the
/// proximity check scores U^{k-1} with the jumps computed in that iteration.
inline RunReport parareal_solve(const SolveSetup& setup) {
  const GridSpec& grid = setup.grid;
  const OdeSystem& sys = setup.system;
  if (static_cast<std::size_t>(setup.u0.size()) != sys.dim) {
    throw ConfigError("parareal_solve: u0 has dimension " + std::to_string(setup.u0.size()) +
                      ", system '" + sys.name + "' expects " + std::to_string(sys.dim));
  }
  if (!(setup.criterion.eps > 0.0)) throw ConfigError("parareal_solve: eps must be positive");
  if (setup.criterion.weight_mode == WeightMode::lyapunov && !setup.criterion.lambda) {
    throw ConfigError("weight mode 'lyapunov' requires a lambda value");
  }

  const Propagator fine = grid.fine(setup.fine_tableau);
  const Propagator coarse = grid.coarse(setup.coarse_tableau);

  RunReport report;
  TrajectoryVec U_prev = coarse_sweep(coarse, sys, grid, setup.u0);
  if (setup.keep_iterates) report.iterates.push_back(U_prev);

  // G(U^0_{n-1}) = U^0_n from the coarse sweep.
  std::vector<StateVec> coarse_prev(U_prev.states.begin() + 1, U_prev.states.end());
  std::vector<StateVec> fine_before;
  TrajectoryVec U_before;
  double lipschitz = 1.0;
  StopCriterion crit = setup.criterion;

  const long cap = std::min(grid.N, setup.max_iterations.value_or(grid.N));
  for (long k = 1; k <= cap; ++k) {
    IterateResult it = parareal_iterate(U_prev, fine, coarse, sys, grid, coarse_prev, setup.workers);

    if (k >= 2) {
      lipschitz = update_lipschitz(lipschitz, U_prev, U_before, it.fine_values, fine_before);
    }
    crit.w = base_weight(crit.weight_mode, crit.lambda, grid.dT, lipschitz);
    report.lipschitz_history.push_back(lipschitz);
    report.weight_history.push_back(crit.w);

    const CheckResult res = check(crit, it.next, U_prev, it.fine_values);
    report.residual_history.push_back(res.value);
    report.K = k;
    if (setup.keep_iterates) report.iterates.push_back(it.next);

    U_before = std::move(U_prev);
    U_prev = std::move(it.next);
    fine_before = std::move(it.fine_values);
    coarse_prev = std::move(it.coarse_values);

    if (res.fired) {
      report.converged = true;
      break;
    }
    if (k == grid.N) {
      report.converged = true;
      report.terminated_by_cap = true;
    }
  }
  report.final_iterate = std::move(U_prev);
  if (setup.compute_reference) {
    report.fine_reference = fine_serial_reference(fine, sys, grid, setup.u0);
  }
  return report;
}

}  // namespace parareal
