#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <vector>

#include "babf/baseline.hpp"
#include "babf/basis.hpp"
#include "babf/covariance.hpp"
#include "babf/dataset.hpp"

namespace babf {

/// Fixed prior quantities of the hierarchical model.
struct HyperParams {
  Eigen::VectorXd mu0;   // prior mean on the working grid (length L)
  double c = 1.0;        // prior precision multiplier for the mean
  double delta = 5.0;    // inverse-Wishart shape (> 2)
  Eigen::MatrixXd A;     // prior covariance structure on the working grid (L x L)
  double a_eps = 3.0;    // inverse-gamma shape for the noise variance
  double b_eps = 1.0;    // inverse-gamma rate for the noise variance
  double a_s = 2.0;      // gamma shape for the covariance scale
  double b_s = 1.0;      // gamma rate for the covariance scale
};

inline void validate(const HyperParams& hp) {
  if (!(hp.c > 0.0)) throw std::invalid_argument("hyperparams: c must be positive");
  if (!(hp.delta > 2.0)) throw std::invalid_argument("hyperparams: delta must exceed 2");
  if (!(hp.a_eps > 0.0) || !(hp.b_eps > 0.0))
    throw std::invalid_argument("hyperparams: a_eps, b_eps must be positive");
  if (!(hp.a_s > 0.0) || !(hp.b_s > 0.0))
    throw std::invalid_argument("hyperparams: a_s, b_s must be positive");
  if (hp.A.rows() != hp.A.cols() || hp.A.rows() != hp.mu0.size())
    throw std::invalid_argument("hyperparams: dimension mismatch between mu0 and A");
}

struct ElicitOptions {
  bool stationary = true;
  std::optional<double> c, delta, a_eps, b_eps, a_s, b_s;
  std::optional<double> matern_nu;        // default 2.5
  std::optional<double> matern_rho;       // default 0.2 * domain length
  std::optional<double> bandwidth_frac;   // default 0.1 * domain length
};

namespace detail {

/// Pooled-scatter mean smoothed onto the working grid. Exact duplicate
/// abscissae are collapsed by averaging first (on a common grid this is the
/// cross-sectional mean); very large pooled scatters are pre-binned to keep
/// the spline solve small.
inline Eigen::VectorXd smoothed_pooled_mean(const FunctionalDataset& data,
                                            const WorkingGrid& grid) {
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(static_cast<std::size_t>(data.total_points()));
  for (const auto& c : data.curves)
    for (Eigen::Index j = 0; j < c.t.size(); ++j)
      pairs.emplace_back(c.t[j], c.y[j]);
  std::sort(pairs.begin(), pairs.end());

  std::vector<double> xs, ys;
  xs.reserve(pairs.size());
  ys.reserve(pairs.size());
  std::size_t i = 0;
  while (i < pairs.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < pairs.size() && pairs[j].first == pairs[i].first) {
      sum += pairs[j].second;
      ++j;
    }
    xs.push_back(pairs[i].first);
    ys.push_back(sum / static_cast<double>(j - i));
    i = j;
  }

  constexpr std::size_t kMaxSites = 120;
  if (xs.size() > kMaxSites) {
    const double lo = xs.front(), hi = xs.back();
    const int nbins = 100;
    std::vector<double> bx(nbins, 0.0), by(nbins, 0.0);
    std::vector<int> bc(nbins, 0);
    for (std::size_t k = 0; k < xs.size(); ++k) {
      int b = static_cast<int>((xs[k] - lo) / (hi - lo) * nbins);
      b = std::clamp(b, 0, nbins - 1);
      bx[static_cast<std::size_t>(b)] += xs[k];
      by[static_cast<std::size_t>(b)] += ys[k];
      ++bc[static_cast<std::size_t>(b)];
    }
    std::vector<double> nx, ny;
    for (int b = 0; b < nbins; ++b) {
      if (bc[static_cast<std::size_t>(b)] == 0) continue;
      nx.push_back(bx[static_cast<std::size_t>(b)] / bc[static_cast<std::size_t>(b)]);
      ny.push_back(by[static_cast<std::size_t>(b)] / bc[static_cast<std::size_t>(b)]);
    }
    xs = std::move(nx);
    ys = std::move(ny);
  }

  if (xs.size() < 4)
    throw std::invalid_argument("elicit_hyperparams: too few distinct observation points");
  const Eigen::Map<const Eigen::VectorXd> xv(xs.data(), static_cast<Eigen::Index>(xs.size()));
  const Eigen::Map<const Eigen::VectorXd> yv(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const SplineFit fit = css_fit(xv, yv);
  return interp_linear(xv, fit.fitted, grid.points);
}

}  // namespace detail

/// Data-driven hyper-priors: smoothed pooled mean for mu0; unit-diagonal
/// Matern (stationary) or normalized smoothed empirical covariance
/// (nonstationary) for A; noise and scale priors moment-matched to baseline
/// estimates.
inline HyperParams elicit_hyperparams(const FunctionalDataset& data, const BasisSystem& basis,
                                      const ElicitOptions& opt = {}) {
  const WorkingGrid& grid = basis.grid;
  const double domain_len = grid.domain_hi - grid.domain_lo;

  HyperParams hp;
  hp.c = opt.c.value_or(1.0);
  hp.delta = opt.delta.value_or(5.0);

  hp.mu0 = detail::smoothed_pooled_mean(data, grid);

  const double bw = opt.bandwidth_frac.value_or(0.1) * domain_len;
  const CovMatrix emp = empirical_covariance_smoothed(data, grid, bw);
  const double trace_emp = std::max(emp.values.trace(), 1e-12);

  if (opt.stationary) {
    MaternParams mp;
    mp.nu = opt.matern_nu.value_or(2.5);
    mp.rho = opt.matern_rho.value_or(0.2 * domain_len);
    mp.sigma2 = 1.0;
    hp.A = matern_matrix(grid.points, mp).values;
  } else {
    const double mean_diag = std::max(emp.values.diagonal().mean(), 1e-12);
    hp.A = clip_to_positive_definite(emp.values / mean_diag);
  }

  const SmoothedDataset smoothed = css_smooth_dataset(data);
  hp.a_eps = opt.a_eps.value_or(3.0);
  hp.b_eps = opt.b_eps.value_or(2.0 * std::max(smoothed.sigma2_hat, 1e-12));

  // Match the prior mean of the covariance scale so that E[scale * A / (delta-2)]
  // has the empirical trace.
  hp.a_s = opt.a_s.value_or(2.0);
  const double prior_mean_s = (hp.delta - 2.0) * trace_emp / hp.A.trace();
  hp.b_s = opt.b_s.value_or(hp.a_s / prior_mean_s);

  validate(hp);
  return hp;
}

/// Prior quantities mapped into coefficient space.
struct InducedPrior {
  Eigen::VectorXd m0_zeta;        // B_tau_inv * mu0
  Eigen::MatrixXd psi_transform;  // B_tau_inv * A * B_tau_inv^T (unscaled)
  double c = 1.0;
  double delta = 5.0;
};

inline InducedPrior induce_prior(const HyperParams& hp, const BasisSystem& basis) {
  validate(hp);
  if (hp.mu0.size() != basis.B_tau_inv.cols())
    throw std::invalid_argument("induce_prior: hyperparameter dimension does not match basis");
  InducedPrior out;
  out.m0_zeta = basis.B_tau_inv * hp.mu0;
  Eigen::MatrixXd psi = basis.B_tau_inv * hp.A * basis.B_tau_inv.transpose();
  out.psi_transform = clip_to_positive_definite(psi);
  out.c = hp.c;
  out.delta = hp.delta;
  return out;
}

/// One Gibbs iteration's parameter values.
struct McmcState {
  Eigen::MatrixXd zeta;        // n x K coefficient rows
  Eigen::VectorXd mu_zeta;     // length K
  Eigen::MatrixXd sigma_zeta;  // K x K, positive definite
  double sigma_eps2 = 1.0;
  double sigma_s2 = 1.0;
};

/// Empirical starting point: baseline-smoothed curves interpolated to the
/// working grid and mapped to coefficients; moments of those coefficients.
inline McmcState initialize_state(const FunctionalDataset& data, const BasisSystem& basis,
                                  const HyperParams& hp) {
  const int n = data.n();
  const int K = basis.K;
  const SmoothedDataset smoothed = css_smooth_dataset(data);

  McmcState st;
  st.zeta.resize(n, K);
  for (int i = 0; i < n; ++i) {
    const Curve& c = smoothed.smooth.curves[static_cast<std::size_t>(i)];
    const Eigen::VectorXd z_tau = interp_linear(c.t, c.y, basis.grid.points);
    st.zeta.row(i) = coefficients_from_values(basis, z_tau).transpose();
  }

  st.mu_zeta = st.zeta.colwise().mean();
  if (n >= 2) {
    Eigen::MatrixXd centered = st.zeta.rowwise() - st.mu_zeta.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    const double ridge = 1e-6 * std::max(cov.trace() / K, 1e-12);
    cov.diagonal().array() += ridge;
    st.sigma_zeta = clip_to_positive_definite(cov);
  } else {
    std::cerr << "[babf] warning: single curve; covariance initialized from the prior scale\n";
    const InducedPrior prior = induce_prior(hp, basis);
    const double s_mean = hp.a_s / hp.b_s;
    st.sigma_zeta = clip_to_positive_definite(prior.psi_transform * (s_mean / (hp.delta - 2.0)));
  }

  st.sigma_eps2 = std::max(smoothed.sigma2_hat, 1e-12);
  st.sigma_s2 = hp.a_s / hp.b_s;
  return st;
}

}  // namespace babf
