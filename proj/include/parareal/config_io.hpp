#pragma once

// YAML reading and writing of solve and sweep configs. Needs yaml-cpp; the
// rest of the library does not.

#include "parareal/harness.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace parareal {

namespace detail {

inline void reject_unknown_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T field(const YAML::Node& node, const char* key, const std::string& where) {
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
void read_if(const YAML::Node& node, const char* key, T& dst, const std::string& where) {
  if (node[key] && !node[key].IsNull()) dst = field<T>(node, key, where);
}

template <typename T>
void read_if(const YAML::Node& node, const char* key, std::optional<T>& dst, const std::string& where) {
  if (node[key] && !node[key].IsNull()) dst = field<T>(node, key, where);
}

// Full round-trip precision for doubles.
inline std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Fields present in `node` override those already in `c`.
inline void apply_solve_yaml(const YAML::Node& node, SolveConfig& c, const std::string& where = "config") {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  detail::reject_unknown_keys(node,
                              {"system", "params", "u0", "fine", "coarse", "T", "N", "xi", "L", "h", "eps",
                               "check", "weight", "lambda", "max_iterations", "snapshots", "seed", "w1_mode",
                               "workers"},
                              where);
  using detail::read_if;
  read_if(node, "system", c.system, where);
  if (node["params"]) {
    if (!node["params"].IsMap()) throw ConfigError(where + ".params: expected a mapping");
    c.params.clear();
    for (const auto& kv : node["params"]) {
      try {
        c.params[kv.first.as<std::string>()] = kv.second.as<double>();
      } catch (const YAML::Exception&) {
        throw ConfigError(where + ".params: values must be numbers");
      }
    }
  }
  read_if(node, "u0", c.u0, where);
  read_if(node, "fine", c.fine, where);
  read_if(node, "coarse", c.coarse, where);
  read_if(node, "T", c.T, where);
  read_if(node, "N", c.N, where);
  read_if(node, "xi", c.xi, where);
  // An explicit null clears the optional grid fields so that a file can
  // switch from h to L.
  if (node["L"] && node["L"].IsNull()) c.L.reset();
  if (node["h"] && node["h"].IsNull()) c.h.reset();
  read_if(node, "L", c.L, where);
  read_if(node, "h", c.h, where);
  read_if(node, "eps", c.eps, where);
  read_if(node, "check", c.check, where);
  read_if(node, "weight", c.weight, where);
  read_if(node, "lambda", c.lambda, where);
  read_if(node, "max_iterations", c.max_iterations, where);
  read_if(node, "snapshots", c.snapshots, where);
  read_if(node, "seed", c.seed, where);
  read_if(node, "w1_mode", c.w1_mode, where);
  read_if(node, "workers", c.workers, where);
}

inline void apply_sweep_yaml(const YAML::Node& node, SweepConfig& s) {
  if (!node.IsMap()) throw ConfigError("sweep: expected a mapping");
  detail::reject_unknown_keys(node, {"base", "mode", "N_list", "T_list", "dT", "criteria", "metrics"}, "sweep");
  if (node["base"]) apply_solve_yaml(node["base"], s.base, "sweep.base");
  using detail::read_if;
  read_if(node, "mode", s.mode, "sweep");
  read_if(node, "N_list", s.N_list, "sweep");
  read_if(node, "T_list", s.T_list, "sweep");
  read_if(node, "dT", s.dT, "sweep");
  if (node["criteria"]) {
    if (!node["criteria"].IsSequence()) throw ConfigError("sweep.criteria: expected a list");
    s.criteria.clear();
    for (const auto& item : node["criteria"]) {
      detail::reject_unknown_keys(item, {"check", "weight"}, "sweep.criteria");
      CriterionSpec cs;
      read_if(item, "check", cs.check, "sweep.criteria");
      read_if(item, "weight", cs.weight, "sweep.criteria");
      s.criteria.push_back(cs);
    }
  }
  if (node["metrics"]) {
    detail::reject_unknown_keys(node["metrics"], {"w1", "error"}, "sweep.metrics");
    read_if(node["metrics"], "w1", s.w1, "sweep.metrics");
    read_if(node["metrics"], "error", s.error, "sweep.metrics");
  }
}

inline YAML::Node load_yaml_text(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

inline YAML::Node load_yaml_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return load_yaml_text(ss.str());
}

inline SolveConfig parse_solve_config(const std::string& text, SolveConfig defaults = {}) {
  apply_solve_yaml(load_yaml_text(text), defaults);
  return defaults;
}

inline SweepConfig parse_sweep_config(const std::string& text, SweepConfig defaults = {}) {
  apply_sweep_yaml(load_yaml_text(text), defaults);
  return defaults;
}

namespace detail {

inline void emit_solve(YAML::Emitter& e, const SolveConfig& c) {
  e << YAML::BeginMap;
  e << YAML::Key << "system" << YAML::Value << c.system;
  if (!c.params.empty()) {
    e << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : c.params) e << YAML::Key << k << YAML::Value << exact(v);
    e << YAML::EndMap;
  }
  if (c.u0) {
    e << YAML::Key << "u0" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double v : *c.u0) e << exact(v);
    e << YAML::EndSeq;
  }
  e << YAML::Key << "fine" << YAML::Value << c.fine;
  e << YAML::Key << "coarse" << YAML::Value << c.coarse;
  e << YAML::Key << "T" << YAML::Value << exact(c.T);
  e << YAML::Key << "N" << YAML::Value << c.N;
  e << YAML::Key << "xi" << YAML::Value << c.xi;
  e << YAML::Key << "L" << YAML::Value;
  if (c.L) e << *c.L; else e << YAML::Null;
  e << YAML::Key << "h" << YAML::Value;
  if (c.h) e << exact(*c.h); else e << YAML::Null;
  e << YAML::Key << "eps" << YAML::Value << exact(c.eps);
  e << YAML::Key << "check" << YAML::Value << c.check;
  e << YAML::Key << "weight" << YAML::Value << c.weight;
  if (c.lambda) e << YAML::Key << "lambda" << YAML::Value << exact(*c.lambda);
  if (c.max_iterations) e << YAML::Key << "max_iterations" << YAML::Value << *c.max_iterations;
  e << YAML::Key << "snapshots" << YAML::Value << c.snapshots;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "w1_mode" << YAML::Value << c.w1_mode;
  e << YAML::Key << "workers" << YAML::Value << c.workers;
  e << YAML::EndMap;
}

}  // namespace detail

inline std::string serialize(const SolveConfig& c) {
  YAML::Emitter e;
  detail::emit_solve(e, c);
  return std::string(e.c_str()) + "\n";
}

inline std::string serialize(const SweepConfig& s) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "mode" << YAML::Value << s.mode;
  if (!s.N_list.empty()) {
    e << YAML::Key << "N_list" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (long n : s.N_list) e << n;
    e << YAML::EndSeq;
  }
  if (!s.T_list.empty()) {
    e << YAML::Key << "T_list" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double t : s.T_list) e << detail::exact(t);
    e << YAML::EndSeq;
  }
  if (s.dT) e << YAML::Key << "dT" << YAML::Value << detail::exact(*s.dT);
  if (!s.criteria.empty()) {
    e << YAML::Key << "criteria" << YAML::Value << YAML::BeginSeq;
    for (const auto& c : s.criteria) {
      e << YAML::Flow << YAML::BeginMap << YAML::Key << "check" << YAML::Value << c.check << YAML::Key
        << "weight" << YAML::Value << c.weight << YAML::EndMap;
    }
    e << YAML::EndSeq;
  }
  e << YAML::Key << "metrics" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "w1"
    << YAML::Value << s.w1 << YAML::Key << "error" << YAML::Value << s.error << YAML::EndMap;
  e << YAML::Key << "base" << YAML::Value;
  detail::emit_solve(e, s.base);
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace parareal
