#pragma once

#include "parareal/criteria.hpp"
#include "parareal/engine.hpp"
#include "parareal/integrators.hpp"
#include "parareal/metrics.hpp"
#include "parareal/systems.hpp"
#include "parareal/tableau.hpp"
#include "parareal/types.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace parareal {

/// User-facing description of one solve. Either L or h may be given; the
/// other is derived from T, N and xi.
struct SolveConfig {
  std::string system = "logistic";
  std::map<std::string, double> params;
  std::optional<std::vector<double>> u0;
  std::string fine = "implicit_euler";
  std::string coarse = "implicit_euler";
  double T = 2048.0;
  long N = 16;
  long xi = 100;
  std::optional<long> L;
  std::optional<double> h = 1e-3;
  double eps = 1e-12;
  std::string check = "standard";
  std::string weight = "unit";
  std::optional<double> lambda;
  std::optional<long> max_iterations;
  bool snapshots = false;
  std::uint64_t seed = 0;  // reserved; nothing is random yet
  std::string w1_mode = "per-coordinate-mean";
  unsigned workers = 0;    // 0 selects the hardware concurrency

  bool operator==(const SolveConfig&) const = default;
};

/// A solve with every name looked up and the grid resolved.
struct ResolvedSolve {
  SolveSetup setup;
  W1Mode w1_mode = W1Mode::per_coordinate_mean;
};

inline GridSpec resolve_grid(const SolveConfig& c) {
  if (c.L && c.h) {
    GridSpec g = make_grid_from_step(c.T, c.N, c.xi, *c.h);
    if (g.L != *c.L) {
      throw ConfigError("config: L = " + std::to_string(*c.L) + " disagrees with h, which implies L = " +
                        std::to_string(g.L));
    }
    return g;
  }
  if (c.h) return make_grid_from_step(c.T, c.N, c.xi, *c.h);
  if (c.L) return make_grid(c.T, c.N, c.xi, *c.L);
  throw ConfigError("config: one of L or h must be given");
}

/// Validates every field and builds the engine inputs; no integration happens here.
inline ResolvedSolve resolve(const SolveConfig& c) {
  ResolvedSolve r;
  SolveSetup& s = r.setup;
  s.system = make_system(c.system, c.params);
  s.fine_tableau = make_tableau(c.fine);
  s.coarse_tableau = make_tableau(c.coarse);
  s.grid = resolve_grid(c);
  if (c.u0) {
    if (c.u0->size() != s.system.dim) {
      throw ConfigError("config: u0 has " + std::to_string(c.u0->size()) + " entries, system '" +
                        c.system + "' has dimension " + std::to_string(s.system.dim));
    }
    s.u0 = Eigen::Map<const StateVec>(c.u0->data(), static_cast<Eigen::Index>(c.u0->size()));
  } else {
    s.u0 = s.system.default_u0;
  }
  if (!(c.eps > 0.0)) throw ConfigError("config: eps must be positive");
  s.criterion.kind = parse_check_kind(c.check);
  s.criterion.eps = c.eps;
  s.criterion.weight_mode = parse_weight_mode(c.weight);
  s.criterion.lambda = c.lambda;
  if (s.criterion.weight_mode == WeightMode::lyapunov && !c.lambda) {
    throw ConfigError("config: weight 'lyapunov' needs lambda (see the lyapunov subcommand)");
  }
  if (c.max_iterations && *c.max_iterations < 1) throw ConfigError("config: max_iterations must be >= 1");
  s.max_iterations = c.max_iterations;
  s.keep_iterates = c.snapshots;
  s.compute_reference = true;
  s.workers = c.workers == 0 ? detail::default_workers() : c.workers;
  r.w1_mode = parse_w1_mode(c.w1_mode);
  return r;
}

struct SingleRun {
  RunReport run;
  MetricsReport metrics;
  GridSpec grid;
};

inline SingleRun run_single(const SolveConfig& c) {
  const ResolvedSolve r = resolve(c);
  SingleRun out;
  out.grid = r.setup.grid;
  out.run = parareal_solve(r.setup);
  out.metrics = compute_metrics(out.run, out.grid, r.w1_mode);
  return out;
}

enum class SweepMode { strong, weak, time };

inline SweepMode parse_sweep_mode(const std::string& s) {
  if (s == "strong") return SweepMode::strong;
  if (s == "weak") return SweepMode::weak;
  if (s == "time") return SweepMode::time;
  throw ConfigError("unknown sweep mode '" + s + "' (expected strong | weak | time)");
}

struct CriterionSpec {
  std::string check = "standard";
  std::string weight = "unit";
  bool operator==(const CriterionSpec&) const = default;
};

struct SweepConfig {
  SolveConfig base;
  std::string mode = "strong";
  std::vector<long> N_list;
  std::vector<double> T_list;
  /// Weak mode chunk length; defaults to base.T / max(N_list).
  std::optional<double> dT;
  std::vector<CriterionSpec> criteria;
  bool w1 = true;
  bool error = true;

  bool operator==(const SweepConfig&) const = default;
};

/// One row's solve config, in the sweep's declared order.
struct SweepPoint {
  CriterionSpec criterion;
  SolveConfig config;
};

inline std::vector<SweepPoint> expand_sweep(const SweepConfig& sw) {
  const SweepMode mode = parse_sweep_mode(sw.mode);
  const std::vector<CriterionSpec> crits =
      sw.criteria.empty() ? std::vector<CriterionSpec>{{sw.base.check, sw.base.weight}} : sw.criteria;
  std::vector<SweepPoint> pts;
  auto add = [&](const CriterionSpec& cs, long N, double T) {
    SolveConfig c = sw.base;
    c.check = cs.check;
    c.weight = cs.weight;
    c.N = N;
    c.T = T;
    pts.push_back({cs, c});
  };
  if (mode == SweepMode::time) {
    if (sw.T_list.empty()) throw ConfigError("sweep: time mode needs a non-empty T_list");
    for (const auto& cs : crits)
      for (double T : sw.T_list) add(cs, sw.base.N, T);
    return pts;
  }
  if (sw.N_list.empty()) throw ConfigError("sweep: " + sw.mode + " mode needs a non-empty N_list");
  long n_max = 0;
  for (long n : sw.N_list) {
    if (n < 1) throw ConfigError("sweep: N values must be >= 1");
    n_max = std::max(n_max, n);
  }
  const double dT = sw.dT.value_or(sw.base.T / static_cast<double>(n_max));
  if (!(dT > 0.0)) throw ConfigError("sweep: dT must be positive");
  for (const auto& cs : crits) {
    for (long N : sw.N_list) {
      add(cs, N, mode == SweepMode::strong ? sw.base.T : static_cast<double>(N) * dT);
    }
  }
  return pts;
}

inline const char* kCsvHeader =
    "check,weight,N,T,dT,xi,h,eps,K,converged,S,serial_work,w1,error_l2,lipschitz_final,note";

namespace detail {

inline std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Notes may contain commas or quotes; quote them CSV-style.
inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

}  // namespace detail

/// One CSV row. A row whose solve threw carries converged=false and the
/// message in the note column.
struct SweepRow {
  CriterionSpec criterion;
  long N = 0;
  double T = 0.0;
  double dT = 0.0;
  long xi = 0;
  double h = 0.0;
  double eps = 0.0;
  long K = 0;
  bool converged = false;
  double S = std::nan("");
  double serial_work = std::nan("");
  double w1 = std::nan("");
  double error_l2 = std::nan("");
  double lipschitz_final = std::nan("");
  std::string note;

  std::string csv() const {
    using detail::fmt6;
    std::ostringstream os;
    os << criterion.check << ',' << criterion.weight << ',' << N << ',' << fmt6(T) << ',' << fmt6(dT) << ','
       << xi << ',' << fmt6(h) << ',' << fmt6(eps) << ',' << K << ',' << (converged ? "true" : "false") << ','
       << fmt6(S) << ',' << fmt6(serial_work) << ',' << fmt6(w1) << ',' << fmt6(error_l2) << ','
       << fmt6(lipschitz_final) << ',' << detail::csv_quote(note);
    return os.str();
  }
};

inline SweepRow blank_row(const SweepPoint& p) {
  SweepRow row;
  row.criterion = p.criterion;
  row.N = p.config.N;
  row.T = p.config.T;
  row.xi = p.config.xi;
  row.eps = p.config.eps;
  row.dT = p.config.T / static_cast<double>(p.config.N);
  if (p.config.h) row.h = *p.config.h;
  return row;
}

inline SweepRow make_row(const SweepPoint& p, const SingleRun& r, bool want_w1 = true, bool want_error = true) {
  SweepRow row = blank_row(p);
  row.dT = r.grid.dT;
  row.h = r.grid.h;
  row.K = r.run.K;
  row.converged = r.run.converged;
  row.S = r.metrics.S;
  row.serial_work = r.metrics.serial_work;
  if (want_w1) row.w1 = r.metrics.W1;
  if (want_error) row.error_l2 = r.metrics.error_l2;
  if (!r.run.lipschitz_history.empty()) row.lipschitz_final = r.run.lipschitz_history.back();
  if (r.run.terminated_by_cap) row.note = "reached K=N";
  return row;
}

inline SweepRow run_point(const SweepPoint& p, bool want_w1, bool want_error) {
  try {
    return make_row(p, run_single(p.config), want_w1, want_error);
  } catch (const std::exception& e) {
    SweepRow row = blank_row(p);
    row.converged = false;
    row.note = std::string("error: ") + e.what();
    return row;
  }
}

/// Runs every point in declared order and returns the CSV text. Config errors
/// in the sweep structure itself are thrown; per-row failures become rows.
inline std::string run_sweep(const SweepConfig& sw, std::vector<SweepRow>* rows_out = nullptr) {
  const auto pts = expand_sweep(sw);
  // Reject bad names up front rather than filling the CSV with error rows.
  for (const auto& p : pts) {
    make_tableau(p.config.fine);
    make_tableau(p.config.coarse);
    make_system(p.config.system, p.config.params);
    parse_check_kind(p.config.check);
    parse_weight_mode(p.config.weight);
  }
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& p : pts) {
    SweepRow row = run_point(p, sw.w1, sw.error);
    out += row.csv() + "\n";
    if (rows_out) rows_out->push_back(std::move(row));
  }
  return out;
}

inline void run_sweep(const SweepConfig& sw, const std::filesystem::path& out_path) {
  const std::string text = run_sweep(sw);
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + out_path.string() + "' for writing");
  f << text;
}

/// Minimal reader for the CSV written above: header names to column values.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("csv: missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline CsvTable parse_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("csv: empty input");
  t.header = split_csv_line(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto r = split_csv_line(line);
    if (r.size() != t.header.size()) throw ConfigError("csv: row has wrong number of fields");
    t.rows.push_back(std::move(r));
  }
  return t;
}

enum class PlotKind { K_vs_T, serial_work, basin };

inline PlotKind parse_plot_kind(const std::string& s) {
  if (s == "K_vs_T") return PlotKind::K_vs_T;
  if (s == "serial_work") return PlotKind::serial_work;
  if (s == "basin") return PlotKind::basin;
  throw ConfigError("unknown plot kind '" + s + "' (expected K_vs_T | serial_work | basin)");
}

/// Writes whitespace-separated series files into out_dir and returns their
/// paths. Sweep CSVs give one file per criterion (check_weight.dat with
/// columns N T value); a basin grid gives x y value triples in gnuplot's
/// blank-line-separated scan format.
inline std::vector<std::filesystem::path> emit_plotdata(std::istream& in, PlotKind kind,
                                                       const std::filesystem::path& out_dir,
                                                       const std::string& stem = "") {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  if (kind == PlotKind::basin) {
    const BasinGrid g = read_basin(in);
    const auto path = out_dir / ((stem.empty() ? std::string("basin") : stem) + ".dat");
    std::ofstream f(path);
    for (int r = 0; r < g.axis_j.resolution; ++r) {
      for (int c = 0; c < g.axis_i.resolution; ++c) {
        f << detail::fmt6(g.axis_i.at(c)) << ' ' << detail::fmt6(g.axis_j.at(r)) << ' '
          << detail::fmt6(g.values(r, c)) << '\n';
      }
      f << '\n';
    }
    written.push_back(path);
    return written;
  }

  const CsvTable t = parse_csv(in);
  const std::size_t c_check = t.column("check"), c_weight = t.column("weight");
  const std::size_t c_N = t.column("N"), c_T = t.column("T");
  const std::size_t c_val = t.column(kind == PlotKind::K_vs_T ? "K" : "serial_work");
  const std::string suffix = kind == PlotKind::K_vs_T ? "_K.dat" : "_serial_work.dat";
  std::vector<std::string> order;
  std::map<std::string, std::string> series;
  for (const auto& r : t.rows) {
    const std::string key = r[c_check] + "_" + r[c_weight];
    if (!series.count(key)) order.push_back(key);
    series[key] += r[c_N] + ' ' + r[c_T] + ' ' + r[c_val] + '\n';
  }
  for (const auto& key : order) {
    const auto path = out_dir / ((stem.empty() ? "" : stem + "_") + key + suffix);
    std::ofstream f(path);
    f << "# N T " << (kind == PlotKind::K_vs_T ? "K" : "serial_work") << '\n' << series[key];
    written.push_back(path);
  }
  return written;
}

}  // namespace parareal
