#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tlstm/tensor.hpp"

namespace tlstm {

/// Eigenpairs of a real symmetric matrix. Eigenvalues are non-increasing and
/// column j of `eigenvectors` belongs to eigenvalues[j].
struct SymEig {
  Vector eigenvalues;
  Matrix eigenvectors;
};

struct JacobiOptions {
  int max_sweeps = 100;
  /// Convergence when the off-diagonal Frobenius norm drops below
  /// relative_tolerance * ||C||_F.
  double relative_tolerance = 1e-12;
  double symmetry_tolerance = 1e-9;
};

namespace detail {

inline double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition. Rotations sweep the strict upper
/// triangle row by row; ties in the final ordering keep the Jacobi column
/// order (stable sort).
inline SymEig sym_eig(const Matrix& c, const JacobiOptions& opt = {}) {
  const Eigen::Index n = c.rows();
  if (n < 1 || c.cols() != n) throw Error(Errc::DimMismatch, "sym_eig needs a non-empty square matrix");
  if (!c.allFinite()) throw Error(Errc::InvalidArgument, "sym_eig input is not finite");

  const double norm = c.norm();
  const double sym_scale = std::max(1.0, norm);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i)
      if (std::abs(c(i, j) - c(j, i)) > opt.symmetry_tolerance * sym_scale)
        throw Error(Errc::NonSymmetric, "matrix is not symmetric within tolerance");

  Matrix a = 0.5 * (c + c.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double threshold = opt.relative_tolerance * norm;

  bool converged = detail::off_diagonal_norm(a) <= threshold;
  for (int sweep = 0; sweep < opt.max_sweeps && !converged; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle from theta = (a_qq - a_pp) / (2 a_pq), picking the
        // smaller root so |t| <= 1.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;

        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = cs * akp - sn * akq;
          a(k, q) = sn * akp + cs * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = cs * apk - sn * aqk;
          a(q, k) = sn * apk + cs * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = cs * vkp - sn * vkq;
          v(k, q) = sn * vkp + cs * vkq;
        }
      }
    }
    converged = detail::off_diagonal_norm(a) <= threshold;
  }
  if (!converged) throw Error(Errc::NoConvergence, "Jacobi sweep budget exhausted");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });

  SymEig out{Vector(n), Matrix(n, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.eigenvalues(j) = a(src, src);
    out.eigenvectors.col(j) = v.col(src);
  }
  return out;
}

}  // namespace tlstm
