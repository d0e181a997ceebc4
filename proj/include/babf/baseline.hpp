#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "babf/basis.hpp"
#include "babf/dataset.hpp"
#include "babf/util.hpp"

namespace babf {

/// Result of smoothing one curve with a roughness-penalized cubic spline.
struct SplineFit {
  Eigen::VectorXd fitted;
  double lambda = 0.0;
  double edf = 0.0;  // trace of the smoother matrix at the chosen lambda
  double gcv = 0.0;
};

namespace detail {

/// Shared per-grid state for the penalized cubic regression spline with a
/// knot at every data point: design matrix, curvature penalty, and per-lambda
/// factorizations. Reused across curves observed on the same grid.
class CssWorkspace {
 public:
  explicit CssWorkspace(const Eigen::VectorXd& t, const Eigen::VectorXd& lambda_grid)
      : t_(t), lambdas_(lambda_grid) {
    const Eigen::Index p = t.size();
    if (p < 4) throw std::invalid_argument("css_fit: need at least 4 points");
    for (Eigen::Index j = 1; j < p; ++j)
      if (!(t[j] > t[j - 1]))
        throw std::invalid_argument("css_fit: grid must be strictly increasing (no duplicates)");
    if (lambdas_.size() == 0) throw std::invalid_argument("css_fit: empty lambda grid");

    const int order = 4, degree = 3;
    std::vector<double> interior(t.data() + 1, t.data() + p - 1);
    knots_ = bspline::clamped_knots(t[0], t[p - 1], interior, order);
    K_ = static_cast<int>(p) + 2;
    B_ = bspline::design_matrix(knots_, K_, degree, t);
    G_ = B_.transpose() * B_;

    // Curvature penalty: integral of products of second derivatives. The
    // integrand is piecewise quadratic, so two-point Gauss is exact.
    Omega_ = Eigen::MatrixXd::Zero(K_, K_);
    Eigen::MatrixXd ders;
    const double gauss = 1.0 / std::sqrt(3.0);
    for (Eigen::Index i = 0; i + 1 < knots_.size(); ++i) {
      const double a = knots_[i], b = knots_[i + 1];
      if (!(b > a)) continue;
      const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
      for (int gq = 0; gq < 2; ++gq) {
        const double x = mid + (gq == 0 ? -1.0 : 1.0) * gauss * half;
        const int span = bspline::find_span(knots_, K_, degree, x);
        bspline::basis_derivatives(knots_, span, degree, x, 2, ders);
        for (int r = 0; r <= degree; ++r)
          for (int s = 0; s <= degree; ++s)
            Omega_(span - degree + r, span - degree + s) += half * ders(2, r) * ders(2, s);
      }
    }

    factors_.reserve(static_cast<std::size_t>(lambdas_.size()));
    edf_.resize(lambdas_.size());
    for (Eigen::Index li = 0; li < lambdas_.size(); ++li) {
      Eigen::MatrixXd M = G_ + lambdas_[li] * Omega_;
      auto ldlt = std::make_unique<Eigen::LDLT<Eigen::MatrixXd>>(M);
      if (ldlt->info() != Eigen::Success)
        throw std::runtime_error("css_fit: penalized system factorization failed");
      edf_[li] = ldlt->solve(G_).trace();
      factors_.push_back(std::move(ldlt));
    }
  }

  SplineFit fit(const Eigen::VectorXd& y) const {
    if (y.size() != t_.size()) throw std::invalid_argument("css_fit: value length mismatch");
    const double p = static_cast<double>(t_.size());
    const Eigen::VectorXd bty = B_.transpose() * y;
    double best_gcv = std::numeric_limits<double>::infinity();
    Eigen::Index best = 0;
    Eigen::VectorXd best_fitted;
    for (Eigen::Index li = 0; li < lambdas_.size(); ++li) {
      const Eigen::VectorXd coef = factors_[static_cast<std::size_t>(li)]->solve(bty);
      const Eigen::VectorXd fitted = B_ * coef;
      const double rss = (y - fitted).squaredNorm();
      const double denom = p - edf_[li];
      const double gcv = (denom > 1e-10) ? p * rss / (denom * denom)
                                         : std::numeric_limits<double>::infinity();
      if (gcv < best_gcv) {
        best_gcv = gcv;
        best = li;
        best_fitted = fitted;
      }
    }
    SplineFit out;
    out.fitted = best_fitted;
    out.lambda = lambdas_[best];
    out.edf = edf_[best];
    out.gcv = best_gcv;
    return out;
  }

  const Eigen::VectorXd& grid() const { return t_; }

 private:
  Eigen::VectorXd t_;
  Eigen::VectorXd lambdas_;
  Eigen::VectorXd knots_;
  int K_ = 0;
  Eigen::MatrixXd B_, G_, Omega_;
  std::vector<std::unique_ptr<Eigen::LDLT<Eigen::MatrixXd>>> factors_;
  std::vector<double> edf_;
};

inline Eigen::VectorXd default_lambda_grid(double t_lo, double t_hi) {
  // Penalty scale follows the cube of the domain length, keeping the grid
  // invariant under rescaling of t.
  const double scale = std::pow(t_hi - t_lo, 3);
  const int count = 50;
  Eigen::VectorXd lam(count);
  const double lo = std::log(1e-8 * scale), hi = std::log(1e4 * scale);
  for (int i = 0; i < count; ++i)
    lam[i] = std::exp(lo + (hi - lo) * i / (count - 1));
  return lam;
}

}  // namespace detail

/// Cubic smoothing-spline fit with the penalty weight chosen by generalized
/// cross-validation over a 50-point log-spaced grid.
inline SplineFit css_fit(const Eigen::VectorXd& t, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& lambda_grid) {
  detail::CssWorkspace ws(t, lambda_grid);
  return ws.fit(y);
}

inline SplineFit css_fit(const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
  if (t.size() < 2) throw std::invalid_argument("css_fit: need at least 4 points");
  return css_fit(t, y, detail::default_lambda_grid(t[0], t[t.size() - 1]));
}

struct SmoothedDataset {
  std::vector<SplineFit> fits;      // aligned with dataset curve order
  FunctionalDataset smooth;         // fitted values on the original grids
  double sigma2_hat = 0.0;          // pooled residual variance estimate
};

/// Smooth every curve independently; the residual variance pools residual
/// sums of squares over pooled residual degrees of freedom.
inline SmoothedDataset css_smooth_dataset(const FunctionalDataset& data) {
  SmoothedDataset out;
  out.fits.reserve(data.curves.size());
  std::vector<Curve> smooth_curves;
  smooth_curves.reserve(data.curves.size());

  std::unique_ptr<detail::CssWorkspace> shared;
  if (data.common_grid) {
    const auto& t0 = data.curves.front().t;
    shared = std::make_unique<detail::CssWorkspace>(
        t0, detail::default_lambda_grid(t0[0], t0[t0.size() - 1]));
  }

  double rss_total = 0.0, dof_total = 0.0;
  for (const auto& c : data.curves) {
    SplineFit fit;
    if (shared) {
      fit = shared->fit(c.y);
    } else {
      fit = css_fit(c.t, c.y);
    }
    rss_total += (c.y - fit.fitted).squaredNorm();
    dof_total += static_cast<double>(c.t.size()) - fit.edf;
    smooth_curves.push_back(Curve{c.id, c.t, fit.fitted});
    out.fits.push_back(std::move(fit));
  }
  out.sigma2_hat = (dof_total > 0.0) ? rss_total / dof_total : 0.0;
  out.smooth = FunctionalDataset::from_curves(std::move(smooth_curves));
  return out;
}

}  // namespace babf
