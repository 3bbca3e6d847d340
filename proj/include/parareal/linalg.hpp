#pragma once

#include "parareal/types.hpp"

#include <algorithm>
#include <cmath>

namespace parareal {

/// Induced 2-norm (largest singular value) by power iteration on M^T M.
///
/// The start vector is fixed so the result is deterministic. Converges once
/// the relative change of the estimate drops below `tol`.
inline double spectral_norm(const Matrix& m, int max_iter = 50, double tol = 1e-10) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();

  const Matrix mtm = m.transpose() * m;
  Eigen::VectorXd x(m.cols());
  // Non-symmetric start vector avoids being orthogonal to the dominant
  // singular vector for the structured matrices we see in practice.
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = 1.0 + 0.1 * static_cast<double>(i);
  x.normalize();

  double sigma2 = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd y = mtm * x;
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    const double next = x.dot(y);
    x = y / ny;
    if (it > 0 && std::abs(next - sigma2) <= tol * std::max(next, 1e-300)) {
      sigma2 = next;
      break;
    }
    sigma2 = next;
  }
  // Rayleigh quotient is a lower bound; one more product tightens it.
  sigma2 = std::max(sigma2, x.dot(mtm * x));
  return std::sqrt(std::max(sigma2, 0.0));
}

}  // namespace parareal
