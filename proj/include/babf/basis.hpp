#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "babf/util.hpp"

namespace babf {

// ---------------------------------------------------------------------------
// Low-level B-spline primitives (de Boor recursion on a clamped knot vector).
// ---------------------------------------------------------------------------
namespace bspline {

/// Index i with knots[i] <= x < knots[i+1], clamped so the right domain
/// endpoint maps into the last nonempty span. `num_basis` is the number of
/// basis functions; knots has size num_basis + degree + 1.
inline int find_span(const Eigen::VectorXd& knots, int num_basis, int degree, double x) {
  if (x >= knots[num_basis]) return num_basis - 1;
  if (x <= knots[degree]) return degree;
  int lo = degree, hi = num_basis;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (x < knots[mid]) hi = mid;
    else lo = mid;
  }
  return lo;
}

/// Values of the degree+1 basis functions that are nonzero at x
/// (functions span-degree .. span).
inline void basis_values(const Eigen::VectorXd& knots, int span, int degree, double x,
                         double* out) {
  double left[8], right[8];
  out[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - knots[span + 1 - j];
    right[j] = knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

/// Values and derivatives up to order nder of the nonzero basis functions at x.
/// ders(k, j) holds the k-th derivative of function span-degree+j.
inline void basis_derivatives(const Eigen::VectorXd& knots, int span, int degree, double x,
                              int nder, Eigen::MatrixXd& ders) {
  const int p = degree;
  Eigen::MatrixXd ndu(p + 1, p + 1);
  double left[8], right[8];
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - knots[span + 1 - j];
    right[j] = knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      const double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }
  ders.setZero(nder + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

  Eigen::MatrixXd a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= nder; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= nder; ++k) {
    for (int j = 0; j <= p; ++j) ders(k, j) *= factor;
    factor *= (p - k);
  }
}

/// Clamped knot vector over [lo, hi] with the given interior knots.
inline Eigen::VectorXd clamped_knots(double lo, double hi, const std::vector<double>& interior,
                                     int order) {
  Eigen::VectorXd knots(2 * order + static_cast<Eigen::Index>(interior.size()));
  for (int j = 0; j < order; ++j) knots[j] = lo;
  for (std::size_t j = 0; j < interior.size(); ++j)
    knots[order + static_cast<Eigen::Index>(j)] = interior[j];
  for (int j = 0; j < order; ++j) knots[knots.size() - order + j] = hi;
  for (Eigen::Index j = 1; j < knots.size(); ++j)
    if (knots[j] < knots[j - 1]) throw std::invalid_argument("knot vector not nondecreasing");
  return knots;
}

/// Dense evaluation matrix: row i holds all num_basis functions at t[i].
inline Eigen::MatrixXd design_matrix(const Eigen::VectorXd& knots, int num_basis, int degree,
                                     const Eigen::VectorXd& t) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t.size(), num_basis);
  double vals[8];
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const int span = find_span(knots, num_basis, degree, t[i]);
    basis_values(knots, span, degree, t[i], vals);
    for (int j = 0; j <= degree; ++j) out(i, span - degree + j) = vals[j];
  }
  return out;
}

}  // namespace bspline

// ---------------------------------------------------------------------------
// Working grid and basis system
// ---------------------------------------------------------------------------

/// Low-dimensional anchor grid tau_1 < ... < tau_L inside the data domain.
struct WorkingGrid {
  Eigen::VectorXd points;
  double domain_lo = 0.0;
  double domain_hi = 0.0;

  int size() const { return static_cast<int>(points.size()); }
};

/// Cubic B-spline system anchored on a working grid: the evaluation matrix on
/// the grid and its (generalized) inverse mapping values to coefficients.
struct BasisSystem {
  int order = 4;
  Eigen::VectorXd knots;  // size K + order
  int K = 0;
  WorkingGrid grid;
  Eigen::MatrixXd B_tau;      // L x K
  Eigen::MatrixXd B_tau_inv;  // K x L
  double condition = 0.0;

  double domain_lo() const { return grid.domain_lo; }
  double domain_hi() const { return grid.domain_hi; }
};

/// Interior percentiles (1/(L+1), ..., L/(L+1)) of the pooled observation
/// grid. The basis domain defaults to the pooled range; an explicit analysis
/// domain containing the data may be supplied instead.
inline WorkingGrid select_working_grid(const Eigen::VectorXd& pooled_sorted, int L,
                                       double domain_lo = std::numeric_limits<double>::quiet_NaN(),
                                       double domain_hi = std::numeric_limits<double>::quiet_NaN()) {
  if (pooled_sorted.size() == 0) throw std::invalid_argument("select_working_grid: empty pooled grid");
  if (L < 4) throw std::invalid_argument("select_working_grid: need at least 4 points for cubic splines");
  std::vector<double> sorted(pooled_sorted.data(), pooled_sorted.data() + pooled_sorted.size());
  WorkingGrid g;
  g.points.resize(L);
  for (int k = 1; k <= L; ++k)
    g.points[k - 1] = quantile_type7(sorted, static_cast<double>(k) / (L + 1));
  for (int k = 1; k < L; ++k)
    if (!(g.points[k] > g.points[k - 1]))
      throw std::invalid_argument("select_working_grid: degenerate pooled grid (tied percentiles)");
  g.domain_lo = std::isnan(domain_lo) ? sorted.front() : domain_lo;
  g.domain_hi = std::isnan(domain_hi) ? sorted.back() : domain_hi;
  if (g.domain_lo > sorted.front() || g.domain_hi < sorted.back())
    throw std::invalid_argument("select_working_grid: analysis domain must contain the data");
  return g;
}

/// Cubic system with boundary knots at the domain endpoints and K-4 interior
/// knots from the averaging rule (mean of 3 consecutive working-grid points).
inline BasisSystem build_basis(const WorkingGrid& grid, int K) {
  const int L = grid.size();
  if (K != L) throw std::invalid_argument("build_basis: only K = L supported");
  if (K < 4) throw std::invalid_argument("build_basis: K must be at least 4");

  BasisSystem sys;
  sys.order = 4;
  sys.K = K;
  sys.grid = grid;

  std::vector<double> interior(static_cast<std::size_t>(K - 4));
  for (int j = 0; j < K - 4; ++j)
    interior[static_cast<std::size_t>(j)] =
        (grid.points[j + 1] + grid.points[j + 2] + grid.points[j + 3]) / 3.0;
  sys.knots = bspline::clamped_knots(grid.domain_lo, grid.domain_hi, interior, sys.order);

  sys.B_tau = bspline::design_matrix(sys.knots, K, sys.order - 1, grid.points);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.B_tau, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv[0];
  const double smin = sv[sv.size() - 1];
  sys.condition = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();

  if (sys.condition < 1e8) {
    sys.B_tau_inv = Eigen::PartialPivLU<Eigen::MatrixXd>(sys.B_tau).inverse();
  } else {
    std::cerr << "[babf] warning: ill-conditioned basis evaluation matrix (cond="
              << sys.condition << "), using truncated pseudo-inverse\n";
    const double tol = 1e-10 * smax;
    Eigen::VectorXd inv_sv(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      inv_sv[i] = (sv[i] > tol) ? 1.0 / sv[i] : 0.0;
    sys.B_tau_inv = svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
  }
  return sys;
}

/// Evaluate all K basis functions at sorted points t inside the closed domain.
inline Eigen::MatrixXd evaluate_basis(const BasisSystem& sys, const Eigen::VectorXd& t) {
  for (Eigen::Index i = 0; i < t.size(); ++i)
    if (t[i] < sys.domain_lo() || t[i] > sys.domain_hi())
      throw std::domain_error("evaluate_basis: point outside basis domain");
  return bspline::design_matrix(sys.knots, sys.K, sys.order - 1, t);
}

/// Coefficients reproducing the given values on the working grid.
inline Eigen::VectorXd coefficients_from_values(const BasisSystem& sys,
                                                const Eigen::VectorXd& z_on_tau) {
  if (z_on_tau.size() != sys.grid.points.size())
    throw std::invalid_argument("coefficients_from_values: length mismatch");
  return sys.B_tau_inv * z_on_tau;
}

}  // namespace babf
