// Command-line front end: solve, sweep, bounds, basin, lyapunov, plotdata.
// Exit status: 0 success, 1 invalid input, 2 numerical failure.

#include "parareal/bounds.hpp"
#include "parareal/config_io.hpp"
#include "parareal/harness.hpp"
#include "parareal/metrics.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace parareal;

namespace {

// Options shared by every subcommand that builds a SolveConfig. Unset
// options leave the file (or default) value alone.
struct SolveFlags {
  std::string config;
  std::optional<std::string> system, fine, coarse, check, weight, w1_mode;
  std::optional<double> T, h, eps, lambda;
  std::optional<long> N, xi, L, max_iterations;
  std::optional<unsigned> workers;
  std::vector<double> u0;
  std::vector<std::string> params;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "YAML config file");
    app->add_option("--system", system, "logistic | lorenz63 | lorenz96 | linear");
    app->add_option("--param", params, "system parameter override, key=value (repeatable)");
    app->add_option("--u0", u0, "initial state")->expected(1, -1);
    app->add_option("--fine", fine, "fine tableau");
    app->add_option("--coarse", coarse, "coarse tableau");
    app->add_option("-T,--T", T, "time horizon");
    app->add_option("-N,--N", N, "chunk count");
    app->add_option("--xi", xi, "coarsening ratio");
    app->add_option("--L", L, "coarse steps per chunk");
    app->add_option("--fine-step", h, "fine step h");
    app->add_option("--eps", eps, "stopping tolerance");
    app->add_option("--check", check, "standard | psi");
    app->add_option("--weight", weight, "unit | lyapunov | lipschitz");
    app->add_option("--lambda", lambda, "Lyapunov exponent for weight=lyapunov");
    app->add_option("--max-iterations", max_iterations, "iteration cap below N");
    app->add_option("--w1-mode", w1_mode, "per-coordinate-mean | first-coordinate");
    app->add_option("--workers", workers, "threads for the fine sweep (0 = all cores)");
  }

  void apply(SolveConfig& c) const {
    if (system) c.system = *system;
    for (const auto& p : params) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw ConfigError("--param expects key=value, got '" + p + "'");
      try {
        c.params[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
      } catch (const std::exception&) {
        throw ConfigError("--param " + p + ": value is not a number");
      }
    }
    if (!u0.empty()) c.u0 = u0;
    if (fine) c.fine = *fine;
    if (coarse) c.coarse = *coarse;
    if (T) c.T = *T;
    if (N) c.N = *N;
    if (xi) c.xi = *xi;
    // Giving only one of L / h on the command line derives the other.
    if (L && !h) c.h.reset();
    if (h && !L) c.L.reset();
    if (L) c.L = *L;
    if (h) c.h = *h;
    if (eps) c.eps = *eps;
    if (check) c.check = *check;
    if (weight) c.weight = *weight;
    if (lambda) c.lambda = *lambda;
    if (max_iterations) c.max_iterations = *max_iterations;
    if (w1_mode) c.w1_mode = *w1_mode;
    if (workers) c.workers = *workers;
  }

  SolveConfig build() const {
    SolveConfig c;
    if (!config.empty()) apply_solve_yaml(load_yaml_file(config), c, config);
    apply(c);
    return c;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f << text;
}

std::string fmt(double v) { return detail::fmt6(v); }

int cmd_solve(const SolveFlags& flags, const std::string& out, bool print_config) {
  const SolveConfig c = flags.build();
  if (print_config) {
    std::cout << serialize(c);
    return 0;
  }
  // Run directly, not through run_point, so numerical failures reach the exit code.
  const SingleRun r = run_single(c);
  const SweepRow row = make_row(SweepPoint{{c.check, c.weight}, c}, r);
  std::string text = std::string(kCsvHeader) + "\n" + row.csv() + "\n";
  write_text(out, text);
  std::cerr << "K=" << r.run.K << (r.run.terminated_by_cap ? " (reached N)" : "") << " S=" << fmt(r.metrics.S)
            << " error_l2=" << fmt(r.metrics.error_l2) << " w1=" << fmt(r.metrics.W1) << "\n";
  return 0;
}

int cmd_bounds(const SolveFlags& flags, long K, double r, double q, long mu_stride, const std::string& csv) {
  const SolveConfig c = flags.build();
  const ResolvedSolve rs = resolve(c);
  const auto& s = rs.setup;
  const Propagator fine = s.grid.fine(s.fine_tableau);
  const TrajectoryVec ref = fine_serial_reference(fine, s.system, s.grid, s.u0);
  const auto samples = interface_samples(ref, s.grid);
  const long steps = s.grid.L * s.grid.xi * s.grid.N;
  const long count = std::max(2L, steps / std::max(1L, mu_stride) + 1);
  const auto dense = dense_samples(s.fine_tableau, s.system, 0.0, s.u0, s.grid.h, count, std::max(1L, mu_stride));
  const ContractionBound b = beta_bound(s.fine_tableau, s.coarse_tableau, s.system, s.grid, samples,
                                        estimate_mu_nu(s.system, dense));
  const BallBudget bb = outer_ball_radius(r, b.beta, K, q);

  std::vector<std::pair<std::string, double>> fields = {
      {"beta", b.beta},       {"transport", b.transport},
      {"source", b.source},   {"g_norm_sup", b.g_norm_sup},
      {"mu", b.mu},           {"nu", b.nu},
      {"C1", b.C1},           {"C2", b.C2},
      {"C3", b.C3},           {"h", s.grid.h},
      {"h_max", b.h_max},     {"source_theoretical", b.source_theoretical},
      {"r", bb.r},            {"K", static_cast<double>(bb.K)},
      {"q", bb.q},            {"R", bb.R}};
  for (const auto& [k, v] : fields) std::printf("%-20s %s\n", k.c_str(), fmt(v).c_str());
  if (b.step_warning) std::printf("warning: h >= h_max, the theoretical source bound does not apply\n");
  if (bb.slow_convergence) std::printf("warning: beta >= 1, the coarse guess must already be within r\n");

  if (!csv.empty()) {
    std::string head, vals;
    for (const auto& [k, v] : fields) {
      head += (head.empty() ? "" : ",") + k;
      vals += (vals.empty() ? "" : ",") + fmt(v);
    }
    head += ",step_warning,slow_convergence";
    vals += std::string(",") + (b.step_warning ? "true" : "false") + "," + (bb.slow_convergence ? "true" : "false");
    write_text(csv, head + "\n" + vals + "\n");
  }
  return 0;
}

int cmd_basin(const SolveFlags& flags, long chunk, std::vector<int> coords, std::vector<double> irange,
              std::vector<double> jrange, int res, bool from_coarse, const std::string& out) {
  const SolveConfig c = flags.build();
  const ResolvedSolve rs = resolve(c);
  const auto& s = rs.setup;
  if (chunk < 1 || chunk > s.grid.N) throw ConfigError("--chunk must lie in [1, N]");
  const Propagator fine = s.grid.fine(s.fine_tableau);
  const TrajectoryVec base = from_coarse ? coarse_sweep(s.grid.coarse(s.coarse_tableau), s.system, s.grid, s.u0)
                                         : fine_serial_reference(fine, s.system, s.grid, s.u0);
  const StateVec& prev = base[chunk - 1];
  const StateVec centre = propagate(fine, s.system, s.grid.chunk_start(chunk - 1), prev);
  if (coords.size() != 2) throw ConfigError("--coords expects two indices");
  for (int k : coords) {
    if (k < 0 || k >= centre.size()) throw ConfigError("--coords index out of range");
  }
  auto range = [&](const std::vector<double>& given, int k) {
    if (given.empty()) return std::pair{centre[k] - 10.0, centre[k] + 10.0};
    if (given.size() != 2) throw ConfigError("axis ranges take two values");
    return std::pair{given[0], given[1]};
  };
  const auto [ilo, ihi] = range(irange, coords[0]);
  const auto [jlo, jhi] = range(jrange, coords[1]);
  const BasinGrid g = basin_scan(s.system, fine, s.grid.chunk_start(chunk - 1), prev,
                                 AxisSpec{coords[0], ilo, ihi, res}, AxisSpec{coords[1], jlo, jhi, res});
  std::ostringstream os;
  write_basin(os, g);
  write_text(out, os.str());
  return 0;
}

int cmd_lyapunov(const SolveFlags& flags, const LyapunovOptions& opt) {
  const SolveConfig c = flags.build();
  const OdeSystem sys = make_system(c.system, c.params);
  StateVec u0 = sys.default_u0;
  if (c.u0) {
    if (c.u0->size() != sys.dim) throw ConfigError("u0 dimension does not match the system");
    u0 = Eigen::Map<const StateVec>(c.u0->data(), static_cast<Eigen::Index>(c.u0->size()));
  }
  std::printf("%s\n", fmt(lyapunov_estimate(sys, u0, opt)).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parareal solver and experiment harness"};
  app.require_subcommand(1);

  SolveFlags solve_flags, bounds_flags, basin_flags, lyap_flags;
  std::string solve_out;
  bool print_config = false;
  auto* solve = app.add_subcommand("solve", "run one Parareal solve and print a CSV row");
  solve_flags.attach(solve);
  solve->add_option("-o,--out", solve_out, "CSV output path (default stdout)");
  solve->add_flag("--print-config", print_config, "print the resolved config as YAML and exit");

  std::string sweep_config, sweep_out, sweep_mode;
  std::vector<long> sweep_N;
  std::vector<double> sweep_T;
  std::optional<unsigned> sweep_workers;
  auto* sweep = app.add_subcommand("sweep", "run a scaling study and write CSV");
  sweep->add_option("-c,--config", sweep_config, "sweep YAML file")->required();
  sweep->add_option("-o,--out", sweep_out, "CSV output path (default stdout)");
  sweep->add_option("--mode", sweep_mode, "strong | weak | time");
  sweep->add_option("--N-list", sweep_N, "chunk counts")->expected(1, -1);
  sweep->add_option("--T-list", sweep_T, "horizons (time mode)")->expected(1, -1);
  sweep->add_option("--workers", sweep_workers, "threads for the fine sweep");

  long b_K = 1, mu_stride = 10;
  double b_r = 1e-9, b_q = 1.0;
  std::string b_csv;
  auto* bounds = app.add_subcommand("bounds", "contraction factor and ball-budget report");
  bounds_flags.attach(bounds);
  bounds->add_option("--K", b_K, "iteration budget for the outer radius");
  bounds->add_option("--r", b_r, "inner tolerance");
  bounds->add_option("--q", b_q, "convergence order");
  bounds->add_option("--mu-stride", mu_stride, "fine steps between mu/nu samples");
  bounds->add_option("--csv", b_csv, "also write the report as CSV");

  long chunk = 1;
  std::vector<int> coords{0, 1};
  std::vector<double> irange, jrange;
  int res = 101;
  bool from_coarse = false;
  std::string basin_out;
  auto* basin = app.add_subcommand("basin", "residual map |U_n - F(U_{n-1})| over a 2D slice");
  basin_flags.attach(basin);
  basin->add_option("--chunk", chunk, "chunk index n (1-based)");
  basin->add_option("--coords", coords, "two coordinate indices")->expected(2);
  basin->add_option("--i-range", irange, "range along the first coordinate")->expected(2);
  basin->add_option("--j-range", jrange, "range along the second coordinate")->expected(2);
  basin->add_option("--resolution", res, "points per axis");
  basin->add_flag("--from-coarse", from_coarse, "take U_{n-1} from the coarse sweep instead of the fine reference");
  basin->add_option("-o,--out", basin_out, "output path (default stdout)");

  LyapunovOptions lopt;
  auto* lyap = app.add_subcommand("lyapunov", "leading Lyapunov exponent (Benettin)");
  lyap_flags.attach(lyap);
  lyap->add_option("--spinup", lopt.spinup, "discarded transient time");
  lyap->add_option("--horizon", lopt.horizon, "averaging time");
  lyap->add_option("--renorm", lopt.renorm_interval, "renormalization interval");
  lyap->add_option("--step", lopt.h, "integration step");
  lyap->add_option("--tableau", lopt.tableau, "integration tableau");

  std::string pd_in, pd_kind, pd_dir = ".", pd_stem;
  auto* plot = app.add_subcommand("plotdata", "split a sweep CSV or basin grid into plot series");
  plot->add_option("-i,--in", pd_in, "sweep CSV or basin grid")->required();
  plot->add_option("-k,--kind", pd_kind, "K_vs_T | serial_work | basin")->required();
  plot->add_option("-d,--dir", pd_dir, "output directory");
  plot->add_option("--stem", pd_stem, "file name prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*solve) return cmd_solve(solve_flags, solve_out, print_config);
    if (*sweep) {
      SweepConfig sw;
      apply_sweep_yaml(load_yaml_file(sweep_config), sw);
      if (!sweep_mode.empty()) sw.mode = sweep_mode;
      if (!sweep_N.empty()) sw.N_list = sweep_N;
      if (!sweep_T.empty()) sw.T_list = sweep_T;
      if (sweep_workers) sw.base.workers = *sweep_workers;
      write_text(sweep_out, run_sweep(sw));
      return 0;
    }
    if (*bounds) return cmd_bounds(bounds_flags, b_K, b_r, b_q, mu_stride, b_csv);
    if (*basin) return cmd_basin(basin_flags, chunk, coords, irange, jrange, res, from_coarse, basin_out);
    if (*lyap) return cmd_lyapunov(lyap_flags, lopt);
    if (*plot) {
      std::ifstream in(pd_in);
      if (!in) throw ConfigError("cannot open '" + pd_in + "'");
      for (const auto& p : emit_plotdata(in, parse_plot_kind(pd_kind), pd_dir, pd_stem)) {
        std::cout << p.string() << "\n";
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const DiagnosticUnavailable& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
