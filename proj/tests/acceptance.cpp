// Acceptance suite: one PASS/FAIL line per criterion. Exits 1 if any
// criterion fails.

#include "parareal/bounds.hpp"
#include "parareal/harness.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace parareal;

namespace {

const std::vector<long> kNs{2, 4, 8, 16, 32, 64, 128};

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [" << what << "]";
    }
  }
};

// Every run of criteria 1-3 is kept so that k-exactness can be checked on it.
struct KExactLog {
  long runs = 0;
  long violations = 0;
  double worst = 0.0;
} kexact;

void record_kexact(const RunReport& r) {
  ++kexact.runs;
  const auto& ref = *r.fine_reference;
  for (std::size_t k = 0; k < r.iterates.size(); ++k) {
    const auto& U = r.iterates[k];
    for (long n = 0; n <= std::min<long>(static_cast<long>(k), ref.N()); ++n) {
      const double scale = std::max(ref[n].norm(), 1e-300);
      const double rel = (U[n] - ref[n]).norm() / scale;
      kexact.worst = std::max(kexact.worst, rel);
      if (rel > 1e-12) ++kexact.violations;
    }
  }
}

SingleRun run_logged(SolveConfig c) {
  c.snapshots = true;
  c.workers = 1;
  SingleRun r = run_single(c);
  record_kexact(r.run);
  return r;
}

std::string join(const std::vector<long>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + ")";
}

std::string g6(double v) { return detail::fmt6(v); }

SolveConfig logistic_base() {
  SolveConfig c;
  c.system = "logistic";
  c.fine = c.coarse = "implicit_euler";
  c.xi = 100;
  c.h = 1e-3;
  c.eps = 1e-12;
  return c;
}

SolveConfig lorenz_base(const std::string& system, double T) {
  SolveConfig c;
  c.system = system;
  c.fine = c.coarse = "rk4";
  c.xi = 100;
  c.h = 1e-4;
  c.eps = 1e-9;
  c.T = T;
  return c;
}

// W1 values at N = 128 handed from criteria 2-3 to criterion 4.
struct W1Pair {
  std::string label;
  double standard = NAN;
  double weighted = NAN;
};
std::vector<W1Pair> w1_pairs;
double lambda_l63 = NAN;

void criterion1(Verdict& v) {
  const std::vector<long> strong_ref{1, 1, 1, 3, 3, 3, 3}, weak_ref{2, 3, 3, 3, 3, 3, 3};
  std::vector<long> ks, kw, ps, pw;
  double worst_err = 0.0;
  for (std::size_t i = 0; i < kNs.size(); ++i) {
    const long N = kNs[i];
    for (bool weak : {false, true}) {
      SolveConfig c = logistic_base();
      c.N = N;
      c.T = weak ? 16.0 * static_cast<double>(N) : 2048.0;
      c.check = "standard";
      const auto s = run_logged(c);
      c.check = "psi";
      const auto p = run_logged(c);
      (weak ? kw : ks).push_back(s.run.K);
      (weak ? pw : ps).push_back(p.run.K);
      worst_err = std::max({worst_err, s.metrics.error_l2, p.metrics.error_l2});
      const long expect = (weak ? weak_ref : strong_ref)[i];
      const std::string tag = (weak ? "weak N=" : "strong N=") + std::to_string(N);
      v.require(std::abs(s.run.K - expect) <= 1, tag + " standard K=" + std::to_string(s.run.K) +
                                                   " vs " + std::to_string(expect) + "+-1");
      v.require(p.run.K <= s.run.K, tag + " psi K > standard K");
      if (N >= 16) v.require(p.run.K <= 2, tag + " psi K=" + std::to_string(p.run.K) + " > 2");
    }
  }
  v.require(worst_err < 1e-10, "max error " + g6(worst_err));
  v.detail << " strong std K=" << join(ks) << " psi K=" << join(ps) << "; weak std K=" << join(kw)
           << " psi K=" << join(pw) << "; max error " << g6(worst_err);
}

void criterion2(Verdict& v) {
  const SolveConfig base = lorenz_base("lorenz63", 102.4);
  {
    const auto s = make_lorenz63();
    lambda_l63 = lyapunov_estimate(s, s.default_u0);
  }
  std::vector<long> k_std, k_lip, k_lyap;
  W1Pair lip{"L63 psi(Lambda_F)"}, lyap{"L63 psi(e^lambda dT)"};
  for (long N : kNs) {
    SolveConfig c = base;
    c.N = N;
    if (N >= 64) {
      c.check = "standard";
      const auto r = run_logged(c);
      k_std.push_back(r.run.K);
      v.require(r.run.K >= 0.8 * static_cast<double>(N), "standard N=" + std::to_string(N) + " K=" +
                                                             std::to_string(r.run.K) + " < 0.8N");
      if (N == 128) lip.standard = lyap.standard = r.metrics.W1;
    }
    c.check = "psi";
    c.weight = "lipschitz";
    const auto a = run_logged(c);
    k_lip.push_back(a.run.K);
    v.require(a.run.K <= 4, "psi(Lambda_F) N=" + std::to_string(N) + " K=" + std::to_string(a.run.K));
    c.weight = "lyapunov";
    c.lambda = lambda_l63;
    const auto b = run_logged(c);
    k_lyap.push_back(b.run.K);
    v.require(b.run.K <= 4, "psi(lyapunov) N=" + std::to_string(N) + " K=" + std::to_string(b.run.K));
    if (N == 128) {
      lip.weighted = a.metrics.W1;
      lyap.weighted = b.metrics.W1;
    }
  }
  w1_pairs.push_back(lip);
  w1_pairs.push_back(lyap);
  v.detail << " T=102.4 lambda=" << g6(lambda_l63) << "; standard K(64,128)=" << join(k_std)
           << "; psi(Lambda_F) K=" << join(k_lip) << "; psi(lyapunov) K=" << join(k_lyap);
}

void criterion3(Verdict& v) {
  SolveConfig c = lorenz_base("lorenz96", 51.2);
  c.N = 128;
  c.check = "standard";
  const auto s = run_logged(c);
  c.check = "psi";
  c.weight = "lipschitz";
  const auto p = run_logged(c);
  v.require(s.run.K >= 0.8 * 128, "standard K=" + std::to_string(s.run.K) + " < 102.4");
  v.require(p.run.K <= 4, "psi(Lambda_F) K=" + std::to_string(p.run.K) + " > 4");
  w1_pairs.push_back({"L96 psi(Lambda_F)", s.metrics.W1, p.metrics.W1});
  v.detail << " T=51.2 N=128: standard K=" << s.run.K << ", psi(Lambda_F) K=" << p.run.K;
}

void criterion4(Verdict& v) {
  if (w1_pairs.empty()) throw NumericalError("criteria 2-3 produced no W1 values");
  for (const auto& w : w1_pairs) {
    const double ratio = w.weighted / w.standard;
    v.detail << " " << w.label << " W1=" << g6(w.weighted) << " vs standard " << g6(w.standard) << ";";
    v.require(std::isfinite(ratio) && ratio >= 0.1 && ratio <= 10.0, w.label + " ratio " + g6(ratio));
  }
}

void criterion5(Verdict& v) {
  SolveConfig base = lorenz_base("lorenz63", 0.0);
  base.xi = 10;
  base.N = 32;
  std::vector<double> work_std, work_lip;
  std::vector<long> k_std, k_lip;
  for (double T : {6.4, 12.8, 25.6, 51.2, 102.4}) {
    SolveConfig c = base;
    c.T = T;
    c.workers = 1;
    c.check = "standard";
    const auto s = run_single(c);
    c.check = "psi";
    c.weight = "lipschitz";
    const auto p = run_single(c);
    work_std.push_back(s.metrics.serial_work);
    work_lip.push_back(p.metrics.serial_work);
    k_std.push_back(s.run.K);
    k_lip.push_back(p.run.K);
  }
  const auto [lo, hi] = std::minmax_element(work_lip.begin(), work_lip.end());
  v.require(*hi < 1.5 * *lo, "psi(Lambda_F) K*dT spread " + g6(*hi / *lo) + " >= 1.5");
  for (std::size_t i = 1; i < work_std.size(); ++i) {
    v.require(work_std[i] > work_std[i - 1], "standard K*dT not increasing at T index " + std::to_string(i));
  }
  v.require(work_std.back() > 2.0 * work_std.front(), "standard K*dT growth " + g6(work_std.back() / work_std.front()));
  v.detail << " N=32 xi=10 T=6.4..102.4: standard K=" << join(k_std) << " psi(Lambda_F) K=" << join(k_lip);
}

void criterion6(Verdict& v) {
  const auto rk = make_tableau("rk4");
  struct Case {
    OdeSystem sys;
    double spinup;
  };
  std::vector<Case> cases{{make_logistic(), 0.0}, {make_lorenz63(), 10.0}, {make_lorenz96(40, 8.0), 10.0}};
  for (const auto& cs : cases) {
    StateVec u = cs.sys.default_u0;
    if (cs.spinup > 0) u = propagate(Propagator{rk, 1e-3, std::lround(cs.spinup / 1e-3), {}}, cs.sys, 0.0, u);
    const auto dense = dense_samples(rk, cs.sys, 0.0, u, 1e-2, 2000);
    const auto mn = estimate_mu_nu(cs.sys, dense);
    std::vector<TimedState> sparse;
    for (std::size_t i = 0; i < dense.size(); i += 100) sparse.push_back(dense[i]);
    const double h_max = source_term_theoretical(rk, rk, 1.0, 10, 10, mn.mu, mn.nu).h_max;
    double h = h_max / 20.0;
    std::vector<double> src, slopes;
    for (int i = 0; i < 4; ++i, h /= 2.0) {
      const double emp = source_term_empirical(Propagator{rk, h, 100, {}}, Propagator{rk, 10 * h, 10, {}}, cs.sys, sparse);
      const double th = source_term_theoretical(rk, rk, h, 10, 10, mn.mu, mn.nu).bound;
      v.require(th >= emp, cs.sys.name + " theoretical < empirical at h=" + g6(h));
      src.push_back(emp);
    }
    for (std::size_t i = 1; i < src.size(); ++i) {
      const double slope = std::log2(src[i - 1] / src[i]);
      slopes.push_back(slope);
      v.require(slope >= 1.7 && slope <= 2.3, cs.sys.name + " slope " + g6(slope));
    }
    v.detail << " " << cs.sys.name << " h0=" << g6(h_max / 20.0) << " log2 ratios " << g6(slopes[0]) << ","
             << g6(slopes[1]) << "," << g6(slopes[2]) << ";";
  }
}

void criterion7(Verdict& v) {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int accepted = 0, attempts = 0;
  double worst_excess = -INFINITY;
  while (accepted < 20 && attempts < 2000) {
    ++attempts;
    const bool logistic = accepted % 2 == 0;
    const long xi = 2 + static_cast<long>(8 * U(rng));
    const long L = 1 + static_cast<long>(3 * U(rng));
    OdeSystem sys;
    ButcherTableau tf, tg;
    StateVec u0;
    GridSpec g;
    if (logistic) {
      sys = make_logistic();
      tf = tg = make_tableau("implicit_euler");
      u0 = StateVec::Constant(1, 0.05 + 0.9 * U(rng));
      g = make_grid(0.3 + 2.7 * U(rng), 3, xi, L);
    } else {
      sys = make_lorenz63();
      tf = make_tableau("rk4");
      tg = make_tableau("implicit_euler");
      u0 = (StateVec(3) << -15 + 30 * U(rng), -15 + 30 * U(rng), 5 + 35 * U(rng)).finished();
      g = make_grid(0.005 + 0.045 * U(rng), 2, xi, L);
    }
    const auto F = g.fine(tf), G = g.coarse(tg);
    const auto Ustar = fine_serial_reference(F, sys, g, u0);
    const auto b = beta_bound(tf, tg, sys, g, interface_samples(Ustar, g));
    if (!(b.beta < 1.0)) continue;
    const double norm = oracle::svd_norm(oracle::update_map_jacobian(Ustar, u0, F, G, sys, g));
    worst_excess = std::max(worst_excess, norm - b.beta);
    v.require(norm <= b.beta + 1e-6, sys.name + " instance " + std::to_string(accepted) + ": |I+Dv|=" + g6(norm) +
                                         " > beta=" + g6(b.beta));
    ++accepted;
  }
  v.require(accepted == 20, "only " + std::to_string(accepted) + " instances with beta < 1");
  v.detail << " " << accepted << " instances (" << attempts << " drawn); max(|I+Dv| - beta)=" << g6(worst_excess);
}

void criterion8(Verdict& v) {
  std::mt19937_64 rng(808);
  std::normal_distribution<double> n01;
  long trials = 0, violations = 0;
  const auto tab = make_tableau("rk4");
  for (double a : {-0.7, 0.4}) {
    const auto sys = make_linear_scalar(a);
    const auto g = make_grid(2.0, 8, 5, 4);
    const auto F = g.fine(tab);
    const double lambda_F = std::abs(std::pow(tab.stability(a * g.h), static_cast<double>(F.steps_per_call)));
    const auto Ustar = fine_serial_reference(F, sys, g, StateVec::Constant(1, 1.0));
    for (double w : {1.0, lambda_F, 1.5}) {
      const auto eq = equivalence_constants(lambda_F, w, g.N);
      for (int t = 0; t < 1000; ++t, ++trials) {
        TrajectoryVec Ut(g.N, Ustar[0]);
        for (long n = 1; n <= g.N; ++n) Ut[n][0] = Ustar[n][0] + n01(rng);
        std::vector<StateVec> fv;
        for (long n = 1; n <= g.N; ++n) fv.push_back(propagate(F, sys, g.chunk_start(n - 1), Ut[n - 1]));
        const double psi = proximity(Ut, fv, w);
        const double err = weighted_norm(Ut, Ustar, w, 1.0);
        if (eq.c_lower * psi > err * (1.0 + 1e-12) || err > eq.C_upper * psi * (1.0 + 1e-12)) ++violations;
      }
    }
  }
  v.require(violations == 0, std::to_string(violations) + " sandwich violations");
  const double c1 = equivalence_constants(2.0, 2.0, 7).C_upper;
  const double c2 = equivalence_constants(1.0, 2.0, 3).C_upper;
  v.require(c1 == 49.0, "theta=1 N=7 C_N=" + g6(c1));
  v.require(std::abs(c2 - 5.25) < 1e-15, "theta=0.5 N=3 C_N=" + g6(c2));
  v.detail << " " << trials << " trajectories, " << violations << " violations; C_N(theta=1,N=7)=" << g6(c1)
           << ", C_N(0.5,3)=" << g6(c2);
}

void criterion9(Verdict& v) {
  v.require(kexact.runs > 0, "no runs from criteria 1-3");
  v.require(kexact.violations == 0, std::to_string(kexact.violations) + " k-exactness violations");

  SolveConfig same = logistic_base();
  same.T = 64.0;
  same.N = 8;
  same.xi = 1;
  same.coarse = same.fine;
  const auto r = run_single(same);
  v.require(r.run.K == 1, "G=F gave K=" + std::to_string(r.run.K));

  const auto s = make_lorenz63();
  const auto tab = make_tableau("rk4");
  const auto g = make_grid(1.0, 10, 100, 1);
  const auto Ustar = fine_serial_reference(g.fine(tab), s, g, s.default_u0);
  const auto it = parareal_iterate(Ustar, g.fine(tab), g.coarse(tab), s, g, {}, 1);
  double drift = 0.0;
  for (long n = 0; n <= g.N; ++n) drift = std::max(drift, (it.next[n] - Ustar[n]).norm() / Ustar[n].norm());
  v.require(drift <= 1e-12, "fixed point moved by " + g6(drift));
  v.detail << " " << kexact.runs << " runs, worst k-exact deviation " << g6(kexact.worst) << "; G=F K=" << r.run.K
           << "; fixed-point drift " << g6(drift);
}

void criterion10(Verdict& v) {
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> U(-10.0, 10.0);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 50;
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = U(rng);
    for (auto& x : b) x = U(rng);
    worst = std::max(worst, std::abs(wasserstein1(a, b) - oracle::assignment_w1(a, b)));
  }
  v.require(worst <= 1e-10, "max deviation " + g6(worst));
  v.detail << " 200 pairs, max |W1 - assignment oracle| = " << g6(worst);
}

void criterion11(Verdict& v) {
  double worst = 0.0;
  for (double beta : {0.1, 0.5, 0.9}) {
    for (long K : {1L, 2L, 5L}) {
      const double R = outer_ball_radius(1e-3, beta, K).R;
      const double expect = 1e-3 / std::pow(beta, static_cast<double>(K));
      worst = std::max(worst, std::abs(R - expect) / expect);
    }
  }
  const double q2 = outer_ball_radius(1e-4, 0.1, 2, 2.0).R;
  v.require(worst <= 1e-10, "q=1 relative deviation " + g6(worst));
  v.require(std::abs(q2 - std::pow(0.1, 0.25)) <= 1e-10, "q=2 value " + g6(q2));
  v.require(std::abs(q2 - 0.56234) < 5e-6, "q=2 value vs 0.56234");
  v.detail << " q=1 max rel deviation " << g6(worst) << "; q=2 R=" << g6(q2);
}

void criterion12(Verdict& v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", speedup_model(4, 1, 100));
  v.require(std::string(buf) == "3.85", "S(4,1,100) prints as " + std::string(buf));
  v.detail << " S(4,1,100)=" << buf << ";";
  // Reference speedups for K = 2, N >= 16 on the Lorenz runs.
  const std::vector<std::pair<long, double>> rows{{16, 7.12}, {32, 12.31}, {64, 19.67}, {128, 28.18}};
  for (const auto& [N, ref] : rows) {
    const double S = speedup_model(N, 2, 100);
    const double gap = std::abs(S - ref) / ref;
    v.require(gap <= 0.03, "N=" + std::to_string(N) + " gap " + g6(100 * gap) + "%");
    v.detail << " N=" << N << " S=" << g6(S) << " vs " << ref << ";";
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Verdict&)>>> criteria{
      {"logistic iteration counts", criterion1},
      {"Lorenz-63 iteration counts", criterion2},
      {"Lorenz-96 iteration counts", criterion3},
      {"weighted vs standard W1", criterion4},
      {"serial work under time scaling", criterion5},
      {"source term h^2 scaling", criterion6},
      {"contraction bound vs finite differences", criterion7},
      {"norm equivalence sandwich", criterion8},
      {"engine invariants", criterion9},
      {"W1 vs assignment oracle", criterion10},
      {"ball budget formulas", criterion11},
      {"speedup model spot checks", criterion12},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failed;
    std::printf("criterion %2zu: %s  %s:%s (%.1fs)\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first,
                v.detail.str().c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
