#pragma once

#include "parareal/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace parareal {

/// Interface states U_0 ... U_N of a chunked trajectory.
struct TrajectoryVec {
  std::vector<StateVec> states;

  TrajectoryVec() = default;
  explicit TrajectoryVec(std::vector<StateVec> s) : states(std::move(s)) {}
  TrajectoryVec(long N, const StateVec& u0) : states(static_cast<std::size_t>(N + 1), u0) {}

  /// Chunk count.
  long N() const { return static_cast<long>(states.size()) - 1; }
  Eigen::Index dim() const { return states.empty() ? 0 : states.front().size(); }

  StateVec& operator[](long n) { return states[static_cast<std::size_t>(n)]; }
  const StateVec& operator[](long n) const { return states[static_cast<std::size_t>(n)]; }

  /// Stacked vector of length d(N+1).
  Eigen::VectorXd flatten() const {
    const Eigen::Index d = dim();
    Eigen::VectorXd out(d * static_cast<Eigen::Index>(states.size()));
    for (std::size_t n = 0; n < states.size(); ++n)
      out.segment(static_cast<Eigen::Index>(n) * d, d) = states[n];
    return out;
  }

  static TrajectoryVec unflatten(const Eigen::VectorXd& flat, Eigen::Index d) {
    if (d <= 0 || flat.size() % d != 0) throw ShapeError("unflatten: size not a multiple of d");
    TrajectoryVec t;
    for (Eigen::Index off = 0; off < flat.size(); off += d) t.states.emplace_back(flat.segment(off, d));
    return t;
  }
};

inline void require_same_shape(const TrajectoryVec& a, const TrajectoryVec& b, const char* where) {
  if (a.N() != b.N() || a.dim() != b.dim()) {
    throw ShapeError(std::string(where) + ": trajectory shapes differ");
  }
}

/// Euclidean norm of the full stacked difference.
inline double distance_l2(const TrajectoryVec& a, const TrajectoryVec& b) {
  require_same_shape(a, b, "distance_l2");
  double acc = 0.0;
  for (long n = 0; n <= a.N(); ++n) acc += (a[n] - b[n]).squaredNorm();
  return std::sqrt(acc);
}

}  // namespace parareal
