#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "babf/basis.hpp"
#include "babf/dataset.hpp"

namespace babf {

// ---------------------------------------------------------------------------
// Matern kernel
// ---------------------------------------------------------------------------

struct MaternParams {
  double rho = 0.5;    // scale, > 0
  double nu = 3.5;     // smoothness order, > 0
  double sigma2 = 1.0; // variance multiplier, >= 0
};

inline void validate(const MaternParams& p) {
  if (!(p.rho > 0.0)) throw std::invalid_argument("matern: rho must be positive");
  if (!(p.nu > 0.0)) throw std::invalid_argument("matern: nu must be positive");
  if (p.sigma2 < 0.0) throw std::invalid_argument("matern: sigma2 must be nonnegative");
}

namespace detail {

inline bool is_half_integer(double nu) {
  const double m = nu - 0.5;
  return std::abs(m - std::round(m)) < 1e-12 && m >= -1e-12;
}

// x^nu K_nu(x) / (Gamma(nu) 2^(nu-1)) for half-integer nu, via the recurrence
// K_{v+1}(x) = K_{v-1}(x) + (2v/x) K_v(x) starting from K_{1/2}.
inline double matern_half_integer(double x, double nu) {
  const int m = static_cast<int>(std::round(nu - 0.5));
  const double k_half = std::sqrt(M_PI / (2.0 * x)) * std::exp(-x);
  double k_prev = k_half;                        // K_{1/2}
  double k_cur = k_half * (1.0 + 1.0 / x);       // K_{3/2}
  if (m == 0) k_cur = k_prev;
  for (int j = 1; j < m; ++j) {
    const double v = j + 0.5;
    const double k_next = k_prev + (2.0 * v / x) * k_cur;
    k_prev = k_cur;
    k_cur = k_next;
  }
  return std::pow(x, nu) * k_cur / (std::tgamma(nu) * std::pow(2.0, nu - 1.0));
}

}  // namespace detail

/// Matern correlation at distance d; equals 1 at d = 0.
inline double matern_correlation(double d, double rho, double nu) {
  if (!(rho > 0.0) || !(nu > 0.0)) throw std::invalid_argument("matern_correlation: rho, nu must be positive");
  if (d < 0.0) throw std::invalid_argument("matern_correlation: distance must be nonnegative");
  const double x = std::sqrt(2.0 * nu) * d / rho;
  if (x < 1e-10) return 1.0;
  if (x > 700.0) return 0.0;  // exp underflow region
  if (detail::is_half_integer(nu)) return detail::matern_half_integer(x, nu);
  return std::pow(x, nu) * std::cyl_bessel_k(nu, x) / (std::tgamma(nu) * std::pow(2.0, nu - 1.0));
}

struct CovMatrix {
  Eigen::MatrixXd values;
  Eigen::VectorXd grid;
};

inline CovMatrix matern_matrix(const Eigen::VectorXd& grid, const MaternParams& p) {
  validate(p);
  const Eigen::Index n = grid.size();
  CovMatrix out;
  out.grid = grid;
  out.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i, i) = p.sigma2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = p.sigma2 * matern_correlation(std::abs(grid[i] - grid[j]), p.rho, p.nu);
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Positive-definite utilities
// ---------------------------------------------------------------------------

inline void symmetrize(Eigen::MatrixXd& m) {
  m = 0.5 * (m + m.transpose()).eval();
}

/// Clip eigenvalues from below at 1e-8 * max eigenvalue (or a tiny absolute
/// floor when the matrix is not positive at all).
inline Eigen::MatrixXd clip_to_positive_definite(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("pd repair: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double emax = ev.maxCoeff();
  const double floor = (emax > 0.0) ? 1e-8 * emax : 1e-12;
  bool changed = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < floor) {
      ev[i] = floor;
      changed = true;
    }
  }
  if (!changed) return sym;
  Eigen::MatrixXd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  symmetrize(out);
  return out;
}

struct CholeskyResult {
  Eigen::MatrixXd L;     // lower factor of M + jitter * I
  double jitter = 0.0;
};

/// Cholesky with an escalating diagonal jitter: 0, then 1e-10 .. 1e-6 relative
/// to the mean diagonal. Throws (naming the matrix's role) if all fail.
inline CholeskyResult safe_cholesky(const Eigen::MatrixXd& m, const std::string& role) {
  if (m.rows() != m.cols()) throw std::invalid_argument("safe_cholesky(" + role + "): not square");
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  const double scale = std::max(sym.trace() / static_cast<double>(sym.rows()),
                                std::numeric_limits<double>::min());
  CholeskyResult res;
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd work = sym;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      res.L = llt.matrixL();
      res.jitter = jitter;
      return res;
    }
    if (jitter == 0.0) {
      jitter = 1e-10 * scale;
    } else {
      jitter *= 10.0;
    }
    if (jitter > 1e-6 * scale)
      throw std::runtime_error("safe_cholesky: factorization failed for " + role +
                               " (exceeded jitter budget)");
  }
}

// ---------------------------------------------------------------------------
// Smoothed empirical covariance on a working grid
// ---------------------------------------------------------------------------

/// Centered cross-products (distinct observation points only, so the noise
/// nugget stays off the diagonal) binned to the nearest working-grid cell,
/// then smoothed with a count-weighted 2-D Gaussian kernel average and
/// repaired to positive definite.
inline CovMatrix empirical_covariance_smoothed(const FunctionalDataset& data,
                                               const WorkingGrid& grid, double bandwidth) {
  if (data.n() < 2) throw std::invalid_argument("empirical covariance: need at least 2 curves");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("empirical covariance: bandwidth must be positive");
  const int L = grid.size();

  // Pooled Nadaraya-Watson mean, used for centering.
  const auto nw_mean = [&](double t0) {
    double num = 0.0, den = 0.0;
    for (const auto& c : data.curves) {
      for (Eigen::Index j = 0; j < c.t.size(); ++j) {
        const double u = (c.t[j] - t0) / bandwidth;
        const double w = std::exp(-0.5 * u * u);
        num += w * c.y[j];
        den += w;
      }
    }
    return den > 0.0 ? num / den : 0.0;
  };

  const auto nearest_cell = [&](double t0) {
    int best = 0;
    double bd = std::abs(grid.points[0] - t0);
    for (int k = 1; k < L; ++k) {
      const double dk = std::abs(grid.points[k] - t0);
      if (dk < bd) {
        bd = dk;
        best = k;
      }
    }
    return best;
  };

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(L, L);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(L, L);
  for (const auto& c : data.curves) {
    const Eigen::Index p = c.t.size();
    Eigen::VectorXd e(p);
    std::vector<int> cell(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
      e[j] = c.y[j] - nw_mean(c.t[j]);
      cell[static_cast<std::size_t>(j)] = nearest_cell(c.t[j]);
    }
    for (Eigen::Index a = 0; a < p; ++a) {
      for (Eigen::Index b = 0; b < p; ++b) {
        if (a == b) continue;
        sums(cell[static_cast<std::size_t>(a)], cell[static_cast<std::size_t>(b)]) += e[a] * e[b];
        counts(cell[static_cast<std::size_t>(a)], cell[static_cast<std::size_t>(b)]) += 1.0;
      }
    }
  }

  // Count-weighted 2-D kernel average over nonempty cells.
  CovMatrix out;
  out.grid = grid.points;
  out.values.resize(L, L);
  Eigen::MatrixXd w1(L, L);
  for (int j = 0; j < L; ++j)
    for (int k = 0; k < L; ++k) {
      const double u = (grid.points[j] - grid.points[k]) / bandwidth;
      w1(j, k) = std::exp(-0.5 * u * u);
    }
  for (int j = 0; j < L; ++j) {
    for (int k = 0; k <= j; ++k) {
      double num = 0.0, den = 0.0;
      for (int a = 0; a < L; ++a) {
        for (int b = 0; b < L; ++b) {
          if (counts(a, b) == 0.0) continue;
          const double w = w1(j, a) * w1(k, b) * counts(a, b);
          num += w * (sums(a, b) / counts(a, b));
          den += w;
        }
      }
      const double v = den > 0.0 ? num / den : 0.0;
      out.values(j, k) = v;
      out.values(k, j) = v;
    }
  }
  out.values = clip_to_positive_definite(out.values);
  return out;
}

}  // namespace babf
