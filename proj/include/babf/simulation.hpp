#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "babf/covariance.hpp"
#include "babf/dataset.hpp"
#include "babf/rng.hpp"
#include "babf/util.hpp"

namespace babf {

enum class GridMode { common, random_uniform };
enum class Transform { none, nonstationary, hermite };

/// mean(t) = offset + amplitude * sin(frequency * t)
struct MeanSpec {
  double offset = 0.0;
  double amplitude = 3.0;
  double frequency = 4.0;

  double operator()(double t) const { return offset + amplitude * std::sin(frequency * t); }
};

struct SimDesign {
  int n = 30;
  int p = 40;
  GridMode grid_mode = GridMode::common;
  double domain_lo = 0.0;
  double domain_hi = M_PI / 2.0;
  MeanSpec mean{};
  MaternParams cov{0.5, 3.5, 5.0};
  Transform transform = Transform::none;
  double noise_sd = std::sqrt(5.0) / 2.0;
  int reference_grid_length = 40;
  std::uint64_t seed = 1;
};

inline void validate(const SimDesign& d) {
  if (d.n < 1 || d.p < 1) throw std::invalid_argument("simulation: n and p must be positive");
  if (d.noise_sd < 0.0) throw std::invalid_argument("simulation: noise sd must be nonnegative");
  if (!(d.domain_hi > d.domain_lo)) throw std::invalid_argument("simulation: empty domain");
  validate(d.cov);
}

namespace stream_tag {
inline constexpr std::uint64_t sim_grids = 10;
inline constexpr std::uint64_t sim_curve = 11;
inline constexpr std::uint64_t sim_noise = 12;
}  // namespace stream_tag

/// Common mode: one shared equally spaced grid. Random mode: n independent
/// sorted uniform samples over the domain.
inline std::vector<Eigen::VectorXd> make_grids(GridMode mode, int n, int p, double lo, double hi,
                                               RngStream& rng) {
  if (p < 2) throw std::invalid_argument("make_grids: need at least 2 points per curve");
  std::vector<Eigen::VectorXd> grids;
  grids.reserve(static_cast<std::size_t>(n));
  if (mode == GridMode::common) {
    const Eigen::VectorXd g = linspace(lo, hi, p);
    for (int i = 0; i < n; ++i) grids.push_back(g);
  } else {
    for (int i = 0; i < n; ++i) {
      std::vector<double> pts(static_cast<std::size_t>(p));
      for (auto& x : pts) x = lo + (hi - lo) * draw_uniform(rng);
      std::sort(pts.begin(), pts.end());
      grids.emplace_back(Eigen::Map<const Eigen::VectorXd>(pts.data(), p));
    }
  }
  return grids;
}

/// Pointwise non-Gaussian transform 0.2 (x^2 - 1) + x.
inline Eigen::VectorXd hermite_transform(const Eigen::VectorXd& x) {
  return 0.2 * (x.array().square() - 1.0).matrix() + x;
}

/// Time warp s(t) = t^(2/3) and amplitude h(t) = t + 1/2 for the
/// nonstationary design.
inline double warp_s(double t) { return std::cbrt(t * t); }
inline double warp_h(double t) { return t + 0.5; }

struct SimulatedData {
  FunctionalDataset truth;     // noiseless signals
  FunctionalDataset observed;  // signals plus iid noise
  Eigen::VectorXd reference_grid;
  Eigen::VectorXd true_mean_ref;
  Eigen::MatrixXd true_cov_ref;
  double noise_var = 0.0;
};

namespace detail {

/// Exact draw of the base process (mean + Matern) on an arbitrary grid.
inline Eigen::VectorXd draw_gp(const Eigen::VectorXd& grid, const MeanSpec& mean,
                               const MaternParams& cov, const Eigen::MatrixXd* chol,
                               RngStream& rng) {
  const Eigen::Index p = grid.size();
  Eigen::VectorXd z(p);
  for (Eigen::Index j = 0; j < p; ++j) z[j] = mean(grid[j]);
  if (cov.sigma2 > 0.0) {
    Eigen::VectorXd eps(p);
    std::normal_distribution<double> nd;
    for (Eigen::Index j = 0; j < p; ++j) eps[j] = nd(rng);
    if (chol != nullptr) {
      z.noalias() += (*chol) * eps;
    } else {
      const Eigen::MatrixXd L = safe_cholesky(matern_matrix(grid, cov).values, "simulation covariance").L;
      z.noalias() += L * eps;
    }
  }
  return z;
}

}  // namespace detail

/// True mean and covariance of the simulated process on a grid, accounting
/// for the selected transform.
inline void true_moments(const SimDesign& d, const Eigen::VectorXd& grid, Eigen::VectorXd& mean,
                         Eigen::MatrixXd& cov) {
  const Eigen::Index m = grid.size();
  mean.resize(m);
  cov.resize(m, m);
  switch (d.transform) {
    case Transform::none: {
      for (Eigen::Index i = 0; i < m; ++i) mean[i] = d.mean(grid[i]);
      cov = matern_matrix(grid, d.cov).values;
      break;
    }
    case Transform::nonstationary: {
      Eigen::VectorXd warped(m);
      for (Eigen::Index i = 0; i < m; ++i) warped[i] = warp_s(grid[i]);
      const Eigen::MatrixXd base = matern_matrix(warped, d.cov).values;
      for (Eigen::Index i = 0; i < m; ++i) mean[i] = warp_h(grid[i]) * d.mean(warped[i]);
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
          cov(i, j) = warp_h(grid[i]) * warp_h(grid[j]) * base(i, j);
      break;
    }
    case Transform::hermite: {
      // For jointly Gaussian (X_s, X_t) with means mu, covariance C:
      //   Cov(0.2 X_s^2 + X_s, 0.2 X_t^2 + X_t)
      //     = C (1 + 0.4 (mu_s + mu_t) + 0.16 mu_s mu_t) + 0.08 C^2.
      const Eigen::MatrixXd base = matern_matrix(grid, d.cov).values;
      Eigen::VectorXd mu(m);
      for (Eigen::Index i = 0; i < m; ++i) mu[i] = d.mean(grid[i]);
      for (Eigen::Index i = 0; i < m; ++i)
        mean[i] = 0.2 * (mu[i] * mu[i] + d.cov.sigma2 - 1.0) + mu[i];
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
          const double c = base(i, j);
          cov(i, j) = c * (1.0 + 0.4 * (mu[i] + mu[j]) + 0.16 * mu[i] * mu[j]) + 0.08 * c * c;
        }
      break;
    }
  }
}

/// Generate true signals and noisy observations for one experiment design.
/// Each curve uses its own seeded substream, so the output is independent of
/// generation order.
inline SimulatedData simulate_dataset(const SimDesign& d) {
  validate(d);
  RngStream grid_rng = RngStream::keyed(d.seed, {stream_tag::sim_grids});
  const auto grids = make_grids(d.grid_mode, d.n, d.p, d.domain_lo, d.domain_hi, grid_rng);

  // Shared factor for the common-grid case.
  Eigen::MatrixXd shared_chol;
  const Eigen::MatrixXd* chol_ptr = nullptr;
  const bool warp = d.transform == Transform::nonstationary;
  if (d.grid_mode == GridMode::common && d.cov.sigma2 > 0.0) {
    Eigen::VectorXd g = grids[0];
    if (warp)
      for (Eigen::Index j = 0; j < g.size(); ++j) g[j] = warp_s(g[j]);
    shared_chol = safe_cholesky(matern_matrix(g, d.cov).values, "simulation covariance").L;
    chol_ptr = &shared_chol;
  }

  std::vector<Curve> truth_curves, observed_curves;
  truth_curves.reserve(static_cast<std::size_t>(d.n));
  observed_curves.reserve(static_cast<std::size_t>(d.n));
  for (int i = 0; i < d.n; ++i) {
    const auto& t = grids[static_cast<std::size_t>(i)];
    RngStream curve_rng = RngStream::keyed(d.seed, {stream_tag::sim_curve,
                                                    static_cast<std::uint64_t>(i)});
    Eigen::VectorXd z;
    switch (d.transform) {
      case Transform::none:
        z = detail::draw_gp(t, d.mean, d.cov, chol_ptr, curve_rng);
        break;
      case Transform::nonstationary: {
        Eigen::VectorXd warped(t.size());
        for (Eigen::Index j = 0; j < t.size(); ++j) warped[j] = warp_s(t[j]);
        z = detail::draw_gp(warped, d.mean, d.cov, chol_ptr, curve_rng);
        for (Eigen::Index j = 0; j < t.size(); ++j) z[j] *= warp_h(t[j]);
        break;
      }
      case Transform::hermite:
        z = hermite_transform(detail::draw_gp(t, d.mean, d.cov, chol_ptr, curve_rng));
        break;
    }

    Eigen::VectorXd y = z;
    if (d.noise_sd > 0.0) {
      RngStream noise_rng = RngStream::keyed(d.seed, {stream_tag::sim_noise,
                                                      static_cast<std::uint64_t>(i)});
      std::normal_distribution<double> nd(0.0, d.noise_sd);
      for (Eigen::Index j = 0; j < y.size(); ++j) y[j] += nd(noise_rng);
    }
    truth_curves.push_back(Curve{i + 1, t, z});
    observed_curves.push_back(Curve{i + 1, t, y});
  }

  SimulatedData out;
  out.truth = FunctionalDataset::from_curves(std::move(truth_curves));
  out.observed = FunctionalDataset::from_curves(std::move(observed_curves));
  out.reference_grid = linspace(d.domain_lo, d.domain_hi, d.reference_grid_length);
  true_moments(d, out.reference_grid, out.true_mean_ref, out.true_cov_ref);
  out.noise_var = d.noise_sd * d.noise_sd;
  return out;
}

}  // namespace babf
