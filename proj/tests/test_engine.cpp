#include "parareal/engine.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace parareal;

namespace {

StateVec scalar(double v) { return StateVec::Constant(1, v); }

// Implicit Euler on u' = u(1-u) solved in closed form: h u^2 + (1-h) u - u_old = 0.
double ie_logistic_step(double u_old, double h) {
  return (-(1.0 - h) + std::sqrt((1.0 - h) * (1.0 - h) + 4.0 * h * u_old)) / (2.0 * h);
}

double max_rel_gap(const TrajectoryVec& a, const TrajectoryVec& b, long upto) {
  double worst = 0.0;
  for (long n = 0; n <= upto; ++n) worst = std::max(worst, (a[n] - b[n]).norm() / (1.0 + b[n].norm()));
  return worst;
}

SolveSetup logistic_setup(long N, double T, CheckKind kind) {
  SolveSetup s;
  s.system = make_logistic();
  s.fine_tableau = make_tableau("implicit_euler");
  s.coarse_tableau = make_tableau("implicit_euler");
  s.grid = make_grid_from_step(T, N, 100, 1e-3);
  s.u0 = s.system.default_u0;
  s.criterion.kind = kind;
  s.criterion.eps = 1e-12;
  return s;
}

SolveSetup lorenz_setup(long N, double T, long xi, double h) {
  SolveSetup s;
  s.system = make_lorenz63();
  s.fine_tableau = make_tableau("rk4");
  s.coarse_tableau = make_tableau("rk4");
  s.grid = make_grid_from_step(T, N, xi, h);
  s.u0 = s.system.default_u0;
  s.criterion.eps = 1e-9;
  return s;
}

}  // namespace

TEST(CoarseSweep, SingleChunk) {
  const auto s = make_lorenz63();
  const auto g = make_grid(0.1, 1, 10, 5);
  const auto G = g.coarse(make_tableau("rk4"));
  const auto U = coarse_sweep(G, s, g, s.default_u0);
  ASSERT_EQ(U.N(), 1);
  EXPECT_EQ(U[0], s.default_u0);
  EXPECT_EQ(U[1], propagate(G, s, 0.0, s.default_u0));
}

TEST(CoarseSweep, ConstantDynamics) {
  const auto s = make_linear_scalar(0.0);
  const auto g = make_grid(1.0, 5, 2, 3);
  const auto U = coarse_sweep(g.coarse(make_tableau("rk4")), s, g, scalar(3.5));
  for (long n = 0; n <= 5; ++n) EXPECT_EQ(U[n][0], 3.5);
}

TEST(CoarseSweep, LogisticImplicitEulerRecurrence) {
  const auto s = make_logistic();
  const auto g = make_grid(0.9, 3, 10, 2);  // coarse step xi*h = 0.15, L = 2
  const auto U = coarse_sweep(g.coarse(make_tableau("implicit_euler")), s, g, scalar(0.1));
  double u = 0.1;
  for (long n = 1; n <= 3; ++n) {
    u = ie_logistic_step(ie_logistic_step(u, 0.15), 0.15);
    EXPECT_NEAR(U[n][0], u, 1e-14);
  }
}

TEST(FineReference, SingleChunkAndAnalyticLogistic) {
  const auto s = make_logistic();
  const auto g1 = make_grid(1.0, 1, 10, 100);
  const auto F1 = g1.fine(make_tableau("rk4"));
  EXPECT_EQ(fine_serial_reference(F1, s, g1, scalar(0.2))[1], propagate(F1, s, 0.0, scalar(0.2)));

  const auto g = make_grid(1.0, 4, 10, 25);  // h = 1e-3
  const auto U = fine_serial_reference(g.fine(make_tableau("rk4")), s, g, scalar(0.2));
  for (long n = 0; n <= 4; ++n) {
    const double t = g.chunk_start(n);
    const double exact = 0.2 * std::exp(t) / (1.0 - 0.2 + 0.2 * std::exp(t));
    EXPECT_NEAR(U[n][0], exact, 1e-12);
  }
}

TEST(Iterate, FixedPointIdempotence) {
  auto s = lorenz_setup(8, 0.8, 10, 1e-3);
  const auto F = s.grid.fine(s.fine_tableau);
  const auto G = s.grid.coarse(s.coarse_tableau);
  const auto Ustar = fine_serial_reference(F, s.system, s.grid, s.u0);
  const auto it = parareal_iterate(Ustar, F, G, s.system, s.grid);
  EXPECT_LT(max_rel_gap(it.next, Ustar, 8), 1e-14);
  for (long n = 1; n <= 8; ++n) EXPECT_EQ(it.fine_values[n - 1], Ustar[n]);
}

TEST(Iterate, KExactnessFromArbitraryStart) {
  auto s = lorenz_setup(6, 1.2, 10, 1e-3);
  const auto F = s.grid.fine(s.fine_tableau);
  const auto G = s.grid.coarse(s.coarse_tableau);
  const auto Ustar = fine_serial_reference(F, s.system, s.grid, s.u0);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  TrajectoryVec U(6, s.u0);
  for (long n = 1; n <= 6; ++n)
    for (auto& x : U[n]) x = 10.0 * n01(rng);
  for (long k = 1; k <= 6; ++k) {
    U = parareal_iterate(U, F, G, s.system, s.grid).next;
    EXPECT_LT(max_rel_gap(U, Ustar, k), 1e-12) << "k=" << k;
  }
}

TEST(Solve, KExactnessAlongSolve) {
  for (auto s : {logistic_setup(16, 32.0, CheckKind::standard), lorenz_setup(16, 1.6, 100, 1e-4)}) {
    s.keep_iterates = true;
    s.max_iterations = 8;
    s.criterion.eps = 1e-300;
    const auto r = parareal_solve(s);
    ASSERT_EQ(r.iterates.size(), static_cast<std::size_t>(r.K + 1));
    for (long k = 1; k <= r.K; ++k) EXPECT_LT(max_rel_gap(r.iterates[k], *r.fine_reference, k), 1e-12);
  }
}

TEST(Solve, IdenticalSolversConvergeInOneIteration) {
  for (long N : {1L, 2L, 8L, 32L}) {
    auto s = lorenz_setup(N, 0.32, 10, 1e-3);
    s.coarse_tableau = s.fine_tableau;
    s.grid.xi = 1;
    s.grid.L = static_cast<long>(std::lround(s.grid.dT / s.grid.h));
    const auto r = parareal_solve(s);
    EXPECT_EQ(r.K, 1) << N;
    EXPECT_TRUE(r.converged);
    EXPECT_LT(max_rel_gap(r.final_iterate, *r.fine_reference, N), 1e-14);
  }
}

TEST(Solve, SingleChunkIsOneFineSolve) {
  auto s = lorenz_setup(1, 0.1, 10, 1e-3);
  const auto r = parareal_solve(s);
  EXPECT_EQ(r.K, 1);
  EXPECT_EQ(r.final_iterate[1], (*r.fine_reference)[1]);
}

TEST(Solve, LogisticIterationCounts) {
  EXPECT_EQ(parareal_solve(logistic_setup(8, 2048.0, CheckKind::standard)).K, 1);
  EXPECT_EQ(parareal_solve(logistic_setup(128, 2048.0, CheckKind::standard)).K, 3);
  EXPECT_EQ(parareal_solve(logistic_setup(128, 2048.0, CheckKind::proximity)).K, 2);
}

TEST(Solve, ReportInvariants) {
  for (auto kind : {CheckKind::standard, CheckKind::proximity}) {
    auto s = lorenz_setup(16, 1.6, 100, 1e-4);
    s.criterion.kind = kind;
    s.criterion.weight_mode = kind == CheckKind::proximity ? WeightMode::lipschitz_dynamic : WeightMode::unit;
    const auto r = parareal_solve(s);
    EXPECT_EQ(r.residual_history.size(), static_cast<std::size_t>(r.K));
    EXPECT_EQ(r.lipschitz_history.size(), static_cast<std::size_t>(r.K));
    EXPECT_TRUE(r.converged);
    if (!r.terminated_by_cap) EXPECT_LT(r.residual_history.back(), s.criterion.eps);
    for (std::size_t i = 1; i < r.weight_history.size(); ++i)
      EXPECT_GE(r.weight_history[i], r.weight_history[i - 1]);
    EXPECT_EQ(r.final_iterate[0], s.u0);
  }
}

TEST(Solve, ReachingNReportsConvergedByCap) {
  auto s = lorenz_setup(4, 4.0, 100, 1e-3);
  s.criterion.eps = 1e-300;
  const auto r = parareal_solve(s);
  EXPECT_EQ(r.K, 4);
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.terminated_by_cap);
}

TEST(Solve, DeterministicAcrossWorkerCounts) {
  auto s = lorenz_setup(32, 3.2, 100, 1e-4);
  s.keep_iterates = true;
  s.workers = 1;
  const auto a = parareal_solve(s);
  s.workers = 5;
  const auto b = parareal_solve(s);
  ASSERT_EQ(a.K, b.K);
  for (long k = 0; k <= a.K; ++k)
    for (long n = 0; n <= 32; ++n) EXPECT_EQ(a.iterates[k][n], b.iterates[k][n]);
  EXPECT_EQ(a.residual_history, b.residual_history);
}

TEST(Solve, Validation) {
  auto s = lorenz_setup(4, 0.4, 10, 1e-3);
  s.u0 = StateVec::Ones(2);
  EXPECT_THROW(parareal_solve(s), ConfigError);
  s = lorenz_setup(4, 0.4, 10, 1e-3);
  s.criterion.eps = 0.0;
  EXPECT_THROW(parareal_solve(s), ConfigError);
  s = lorenz_setup(4, 0.4, 10, 1e-3);
  s.criterion.kind = CheckKind::proximity;
  s.criterion.weight_mode = WeightMode::lyapunov;
  EXPECT_THROW(parareal_solve(s), ConfigError);
}

TEST(Solve, BlowUpTaggedWithChunk) {
  SolveSetup s;
  s.system = make_logistic();
  s.fine_tableau = make_tableau("explicit_euler");
  s.coarse_tableau = make_tableau("explicit_euler");
  s.grid = make_grid(400.0, 4, 2, 50);  // h = 1: explicit Euler diverges from u0 < 0
  s.u0 = scalar(-10.0);
  try {
    parareal_solve(s);
    FAIL() << "expected BlowUp";
  } catch (const BlowUp& e) {
    EXPECT_EQ(e.chunk(), 0);
  }
}

TEST(ParallelFor, RethrowsLowestFailingIndex) {
  try {
    detail::parallel_for(10, 3, [](long i) {
      if (i == 4 || i == 7) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "4");
  }
}
