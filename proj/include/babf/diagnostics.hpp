#pragma once

#include <Eigen/Dense>

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "babf/dataset.hpp"
#include "babf/util.hpp"

namespace babf {

/// Upper tail probability of a chi-squared variable with dof degrees of
/// freedom, via the regularized incomplete gamma function.
inline double chi2_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

/// Value above which a chi-squared with dof degrees of freedom has upper tail
/// probability q.
inline double chi2_isf(double q, double dof) {
  return 2.0 * boost::math::gamma_q_inv(0.5 * dof, q);
}

// ---------------------------------------------------------------------------
// Convergence: potential scale reduction factor
// ---------------------------------------------------------------------------

struct PsrfEntry {
  std::string name;
  double rhat = 1.0;
  bool degenerate = false;
};

struct PsrfReport {
  std::vector<PsrfEntry> entries;
  double threshold = 1.1;
  bool computed = false;
  bool pass = true;

  double max_rhat() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.rhat);
    return m;
  }
};

/// Split-half Gelman-Rubin statistic over two or more equal-length traces.
/// Zero-variance traces report 1 with the degenerate flag.
inline PsrfEntry psrf_entry(const std::string& name,
                            const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("psrf: need at least 2 chains");
  const std::size_t len = chains[0].size();
  for (const auto& c : chains)
    if (c.size() != len) throw std::invalid_argument("psrf: chains must have equal length");
  if (len < 10) throw std::invalid_argument("psrf: chains too short");

  const std::size_t half = len / 2;
  std::vector<std::pair<std::size_t, std::size_t>> segs;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    segs.emplace_back(c, 0);
    segs.emplace_back(c, half);
  }
  const auto m = static_cast<double>(segs.size());
  const auto nn = static_cast<double>(half);

  std::vector<double> means, vars;
  for (const auto& [c, off] : segs) {
    double mu = 0.0;
    for (std::size_t i = 0; i < half; ++i) mu += chains[c][off + i];
    mu /= nn;
    double v = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      const double d = chains[c][off + i] - mu;
      v += d * d;
    }
    v /= (nn - 1.0);
    means.push_back(mu);
    vars.push_back(v);
  }
  double w = 0.0;
  for (double v : vars) w += v;
  w /= m;
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double b_over_n = 0.0;
  for (double mu : means) b_over_n += (mu - grand) * (mu - grand);
  b_over_n /= (m - 1.0);

  PsrfEntry out{name, 1.0, false};
  const double scale = std::abs(grand) + 1.0;
  if (w <= 1e-300 * scale * scale) {
    out.degenerate = true;
    return out;
  }
  const double var_plus = (nn - 1.0) / nn * w + b_over_n;
  out.rhat = std::sqrt(var_plus / w);
  return out;
}

inline double psrf(const std::vector<std::vector<double>>& chains) {
  return psrf_entry("", chains).rhat;
}

// ---------------------------------------------------------------------------
// Goodness of fit via standardized-residual discrepancies
// ---------------------------------------------------------------------------

struct GofReport {
  double level = 0.05;
  double median_p = 1.0;
  double p_q05 = 1.0, p_q95 = 1.0;
  double frac_below_level = 0.0;
  std::vector<double> per_curve_median_p;
  bool lack_of_fit = false;
};

/// Report from per-draw chi-squared statistics. The tail probability is a
/// decreasing function of the statistic, so quantiles of p come from the
/// opposite quantiles of the statistic.
inline GofReport gof_from_stats(const std::vector<double>& t_agg, double dof_agg,
                                const Eigen::MatrixXd& t_curve,
                                const std::vector<double>& dof_curve, double level) {
  if (t_agg.empty()) throw std::invalid_argument("gof: no posterior draws");
  GofReport out;
  out.level = level;

  std::vector<double> sorted = t_agg;
  std::sort(sorted.begin(), sorted.end());
  out.median_p = chi2_sf(quantile_type7(sorted, 0.5), dof_agg);
  out.p_q05 = chi2_sf(quantile_type7(sorted, 0.95), dof_agg);
  out.p_q95 = chi2_sf(quantile_type7(sorted, 0.05), dof_agg);
  const double t_crit = chi2_isf(level, dof_agg);
  double cnt = 0.0;
  for (double t : t_agg)
    if (t > t_crit) cnt += 1.0;
  out.frac_below_level = cnt / static_cast<double>(t_agg.size());

  out.per_curve_median_p.resize(static_cast<std::size_t>(t_curve.rows()));
  std::vector<double> col(static_cast<std::size_t>(t_curve.cols()));
  for (Eigen::Index i = 0; i < t_curve.rows(); ++i) {
    for (Eigen::Index g = 0; g < t_curve.cols(); ++g) col[static_cast<std::size_t>(g)] = t_curve(i, g);
    std::sort(col.begin(), col.end());
    out.per_curve_median_p[static_cast<std::size_t>(i)] =
        chi2_sf(quantile_type7(col, 0.5), dof_curve[static_cast<std::size_t>(i)]);
  }
  out.lack_of_fit = out.median_p < level;
  return out;
}

/// Convenience entry point from explicit draws: for each posterior draw g,
/// T(g) = sum_ij ((y_ij - z_ij(g)) / sigma_eps(g))^2 against a chi-squared
/// with one degree of freedom per observation.
inline GofReport gof_pdm(const FunctionalDataset& data,
                         const std::vector<std::vector<Eigen::VectorXd>>& z_draws,
                         const std::vector<double>& sigma_eps2_draws, double level = 0.05) {
  const std::size_t g_count = z_draws.size();
  if (g_count == 0 || sigma_eps2_draws.size() != g_count)
    throw std::invalid_argument("gof_pdm: draw count mismatch");
  const auto n = static_cast<std::size_t>(data.n());
  std::vector<double> t_agg(g_count);
  Eigen::MatrixXd t_curve(data.n(), static_cast<Eigen::Index>(g_count));
  std::vector<double> dof_curve(n);
  for (std::size_t i = 0; i < n; ++i)
    dof_curve[i] = static_cast<double>(data.curves[i].t.size());
  for (std::size_t g = 0; g < g_count; ++g) {
    if (z_draws[g].size() != n) throw std::invalid_argument("gof_pdm: curve count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t_i = (data.curves[i].y - z_draws[g][i]).squaredNorm() / sigma_eps2_draws[g];
      t_curve(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) = t_i;
      total += t_i;
    }
    t_agg[g] = total;
  }
  return gof_from_stats(t_agg, static_cast<double>(data.total_points()), t_curve, dof_curve,
                        level);
}

// ---------------------------------------------------------------------------
// Scores and coverage
// ---------------------------------------------------------------------------

inline double signal_rmse(const std::vector<Eigen::VectorXd>& estimate,
                          const std::vector<Eigen::VectorXd>& truth) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("signal_rmse: curve count mismatch");
  double ss = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    if (estimate[i].size() != truth[i].size())
      throw std::invalid_argument("signal_rmse: grid mismatch on curve " + std::to_string(i));
    ss += (estimate[i] - truth[i]).squaredNorm();
    count += estimate[i].size();
  }
  return std::sqrt(ss / static_cast<double>(count));
}

inline double grid_rmse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("grid_rmse: grid mismatch");
  return std::sqrt((estimate - truth).squaredNorm() / static_cast<double>(estimate.size()));
}

inline double surface_rmse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw std::invalid_argument("surface_rmse: grid mismatch");
  return std::sqrt((estimate - truth).squaredNorm() / static_cast<double>(estimate.size()));
}

/// Fraction of points where the truth lies inside [lo, hi] (inclusive).
inline double coverage(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                       const Eigen::VectorXd& truth) {
  if (lo.size() != truth.size() || hi.size() != truth.size())
    throw std::invalid_argument("coverage: grid mismatch");
  if (truth.size() == 0) throw std::invalid_argument("coverage: empty grid");
  double inside = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    if (truth[i] >= lo[i] && truth[i] <= hi[i]) inside += 1.0;
  return inside / static_cast<double>(truth.size());
}

inline double coverage(const Eigen::MatrixXd& lo, const Eigen::MatrixXd& hi,
                       const Eigen::MatrixXd& truth) {
  return coverage(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size())),
                  Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size())),
                  Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(truth.data(), truth.size())));
}

}  // namespace babf
