#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "babf/covariance.hpp"
#include "babf/model.hpp"
#include "babf/rng.hpp"
#include "babf/summaries.hpp"

namespace babf {

struct McmcConfig {
  int burn_in = 2000;
  int posterior_samples = 10000;
  int thinning = 1;
  int chains = 2;
  std::uint64_t seed = 12345;
};

inline void validate(const McmcConfig& cfg) {
  if (cfg.burn_in < 1 || cfg.posterior_samples < 1 || cfg.chains < 1)
    throw std::invalid_argument("mcmc config: counts must be positive");
  if (cfg.thinning < 1) throw std::invalid_argument("mcmc config: thinning must be >= 1");
}

namespace stream_tag {
inline constexpr std::uint64_t chain = 1;
inline constexpr std::uint64_t curve = 2;
inline constexpr std::uint64_t summary = 3;
inline constexpr std::uint64_t merge = 4;
}  // namespace stream_tag

// ---------------------------------------------------------------------------
// Conditional samplers
// ---------------------------------------------------------------------------

/// Coefficient draw for one curve given its data and the current population
/// parameters. The conditional is normal with precision B'B/s2 + prec; a
/// single Cholesky of the precision drives both the mean solve and the draw.
inline Eigen::VectorXd sample_zeta_i(const Eigen::VectorXd& y, const Eigen::MatrixXd& B,
                                     const Eigen::VectorXd& mu_zeta,
                                     const Eigen::MatrixXd& sigma_zeta, double sigma_eps2,
                                     RngStream& rng) {
  if (!(sigma_eps2 > 0.0)) throw std::invalid_argument("sample_zeta_i: noise variance must be positive");
  const Eigen::Index K = B.cols();
  const Eigen::MatrixXd L_sz = safe_cholesky(sigma_zeta, "coefficient covariance").L;
  const Eigen::MatrixXd Linv =
      L_sz.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(K, K));
  const Eigen::MatrixXd prec = Linv.transpose() * Linv;

  Eigen::MatrixXd vinv = prec;
  vinv.noalias() += B.transpose() * B / sigma_eps2;
  const Eigen::MatrixXd L_v = safe_cholesky(vinv, "coefficient conditional precision").L;
  Eigen::VectorXd rhs = B.transpose() * y / sigma_eps2 + prec * mu_zeta;
  L_v.triangularView<Eigen::Lower>().solveInPlace(rhs);
  L_v.transpose().triangularView<Eigen::Upper>().solveInPlace(rhs);  // rhs is now the mean
  Eigen::VectorXd z(K);
  std::normal_distribution<double> nd;
  for (Eigen::Index k = 0; k < K; ++k) z[k] = nd(rng);
  L_v.transpose().triangularView<Eigen::Upper>().solveInPlace(z);
  return rhs + z;
}

/// Population mean draw given coefficients: normal with mean
/// (sum zeta_i + c m0)/(n+c) and covariance sigma_zeta/(n+c).
inline Eigen::VectorXd sample_mu_zeta(const Eigen::MatrixXd& zeta, const Eigen::VectorXd& m0,
                                      double c, const Eigen::MatrixXd& sigma_zeta,
                                      RngStream& rng) {
  const auto n = static_cast<double>(zeta.rows());
  if (n < 1) throw std::invalid_argument("sample_mu_zeta: need at least one curve");
  const Eigen::MatrixXd L = safe_cholesky(sigma_zeta, "coefficient covariance").L;
  Eigen::VectorXd mean = (zeta.colwise().sum().transpose() + c * m0) / (n + c);
  Eigen::VectorXd z(zeta.cols());
  std::normal_distribution<double> nd;
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = nd(rng);
  return mean + (L * z) / std::sqrt(n + c);
}

/// Inverse-Wishart draw with shape delta and scale Psi, in the convention
/// where the mean is Psi/(delta-2): the inverse of a Wishart with
/// delta + K - 1 degrees of freedom and scale Psi^{-1}. Sampled by Bartlett
/// decomposition and triangular solves; no matrix is inverted explicitly.
inline Eigen::MatrixXd sample_inverse_wishart(double delta, const Eigen::MatrixXd& psi,
                                              RngStream& rng) {
  const Eigen::Index K = psi.rows();
  const double df = delta + static_cast<double>(K) - 1.0;
  if (!(df > static_cast<double>(K) - 1.0))
    throw std::invalid_argument("sample_inverse_wishart: shape too small");
  const Eigen::MatrixXd L_psi = safe_cholesky(psi, "inverse-Wishart scale").L;

  Eigen::MatrixXd bart = Eigen::MatrixXd::Zero(K, K);
  std::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < K; ++i) {
    bart(i, i) = std::sqrt(draw_chi_squared(rng, df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) bart(i, j) = nd(rng);
  }
  // W = C Bart Bart' C' with C C' = Psi^{-1}; the inverse draw is Y'Y with
  // Y solving Bart Y = L_psi'.
  Eigen::MatrixXd y = L_psi.transpose();
  bart.triangularView<Eigen::Lower>().solveInPlace(y);
  Eigen::MatrixXd out = y.transpose() * y;
  symmetrize(out);
  return out;
}

/// Coefficient-covariance draw: inverse-Wishart with shape n + 1 + delta and
/// scale from the centered coefficient scatter, the shrunken mean term, and
/// the scaled prior structure.
inline Eigen::MatrixXd sample_sigma_zeta(const Eigen::MatrixXd& zeta,
                                         const Eigen::VectorXd& mu_zeta,
                                         const Eigen::VectorXd& m0, double c, double delta,
                                         const Eigen::MatrixXd& psi_scaled, RngStream& rng) {
  const auto n = static_cast<double>(zeta.rows());
  Eigen::MatrixXd centered = zeta.rowwise() - mu_zeta.transpose();
  Eigen::MatrixXd psi = centered.transpose() * centered;
  const Eigen::VectorXd dm = mu_zeta - m0;
  psi.noalias() += c * dm * dm.transpose();
  psi += psi_scaled;
  symmetrize(psi);
  return sample_inverse_wishart(n + 1.0 + delta, psi, rng);
}

/// Noise-variance draw given residuals: inverse-gamma with shape
/// a + (total points)/2 and rate b + rss/2.
inline double sample_sigma_eps(double rss, double total_points, double a_eps, double b_eps,
                               RngStream& rng) {
  if (rss < 0.0) throw std::invalid_argument("sample_sigma_eps: negative residual sum of squares");
  return draw_inverse_gamma(rng, a_eps + 0.5 * total_points, b_eps + 0.5 * rss);
}

inline double sample_sigma_s_from_trace(double trace_term, int K, double delta, double a_s,
                                        double b_s, RngStream& rng) {
  const double shape = a_s + (delta + K - 1.0) * K / 2.0;
  const double rate = b_s + 0.5 * trace_term;
  return draw_gamma(rng, shape, rate);
}

/// Covariance-scale draw: gamma with shape a_s + (delta+K-1)K/2 and rate
/// b_s + trace(A_zeta Sigma^{-1})/2, computed in coefficient space.
inline double sample_sigma_s(const Eigen::MatrixXd& sigma_zeta, const Eigen::MatrixXd& a_zeta,
                             double delta, double a_s, double b_s, RngStream& rng) {
  const Eigen::MatrixXd L = safe_cholesky(sigma_zeta, "coefficient covariance").L;
  const Eigen::MatrixXd L_a = safe_cholesky(a_zeta, "prior structure").L;
  const Eigen::MatrixXd x = L.triangularView<Eigen::Lower>().solve(L_a);
  return sample_sigma_s_from_trace(x.squaredNorm(), static_cast<int>(sigma_zeta.rows()), delta,
                                   a_s, b_s, rng);
}

// ---------------------------------------------------------------------------
// Reconstruction of function-space quantities from coefficient space
// ---------------------------------------------------------------------------

inline Eigen::VectorXd reconstruct_signal(const BasisSystem& basis, const Eigen::VectorXd& zeta_i,
                                          const Eigen::VectorXd& t) {
  return evaluate_basis(basis, t) * zeta_i;
}

inline Eigen::VectorXd reconstruct_mean(const BasisSystem& basis, const Eigen::VectorXd& mu_zeta,
                                        const Eigen::VectorXd& t) {
  return evaluate_basis(basis, t) * mu_zeta;
}

inline Eigen::MatrixXd reconstruct_covariance(const BasisSystem& basis,
                                              const Eigen::MatrixXd& sigma_zeta,
                                              const Eigen::VectorXd& g1,
                                              const Eigen::VectorXd& g2) {
  return evaluate_basis(basis, g1) * sigma_zeta * evaluate_basis(basis, g2).transpose();
}

// ---------------------------------------------------------------------------
// Chain driver
// ---------------------------------------------------------------------------

struct SummaryOptions {
  int reservoir_capacity = 2000;
  bool track_reference = true;  // reference-grid mean/covariance bands
  bool track_signals = true;    // per-observation signal bands
};

/// Retained output of one chain: scalar traces, goodness-of-fit statistics,
/// running means of the coefficient-space state, and subsampled draws for
/// pointwise credible bands. Memory scales with the number of observations
/// and the basis size, not with the pooled grid dimension.
struct ChainResult {
  int chain_index = 0;
  long retained = 0;

  std::vector<double> sigma_eps2_trace, sigma_s2_trace, trace_sigma_zeta_trace;
  std::vector<double> zeta_first_trace, zeta_mid_trace;

  // Scaled residual statistics per retained draw (aggregate and per curve);
  // chi-squared tail probabilities are derived from them at reporting time.
  std::vector<double> gof_t_trace;
  Eigen::MatrixXd gof_t_curve;  // n x retained

  Eigen::MatrixXd zeta_mean;        // n x K
  Eigen::VectorXd mu_zeta_mean;     // K
  Eigen::MatrixXd sigma_zeta_mean;  // K x K

  ReservoirBank signals;    // all curves' reconstructed values, curve-major
  ReservoirBank mu_ref;     // mean on the reference grid
  ReservoirBank sigma_ref;  // covariance on the reference grid, upper triangle
  ReservoirBank sigma_tau;  // covariance on the working grid, upper triangle

  std::size_t retained_bytes() const {
    std::size_t b = signals.bytes() + mu_ref.bytes() + sigma_ref.bytes() + sigma_tau.bytes();
    b += (sigma_eps2_trace.capacity() + sigma_s2_trace.capacity() +
          trace_sigma_zeta_trace.capacity() + zeta_first_trace.capacity() +
          zeta_mid_trace.capacity() + gof_t_trace.capacity()) * sizeof(double);
    b += static_cast<std::size_t>(gof_t_curve.size()) * sizeof(double);
    b += static_cast<std::size_t>(zeta_mean.size() + mu_zeta_mean.size() +
                                  sigma_zeta_mean.size()) * sizeof(double);
    return b;
  }
};

inline Eigen::Index upper_triangle_size(Eigen::Index m) { return m * (m + 1) / 2; }

/// Runs the full Gibbs sweep cycle from a given starting state: per-curve
/// coefficient draws, population mean and covariance, then the noise variance
/// and the prior scale. Fully deterministic given the seed; per-curve draws
/// use substreams keyed by (chain, sweep, curve id).
inline ChainResult run_chain(const FunctionalDataset& data, const BasisSystem& basis,
                             const HyperParams& hp, const McmcState& init,
                             const McmcConfig& cfg, int chain_index,
                             const Eigen::VectorXd& reference_grid,
                             const SummaryOptions& sopt = {}) {
  validate(cfg);
  validate(hp);
  const int n = data.n();
  const int K = basis.K;
  const double total_points = static_cast<double>(data.total_points());

  const InducedPrior prior = induce_prior(hp, basis);
  const Eigen::MatrixXd L_a = safe_cholesky(prior.psi_transform, "prior structure").L;

  // Per-curve constants. The residual sum of squares is evaluated through the
  // cached quadratic form y'y - 2 zeta'B'y + zeta'B'B zeta, so the per-sweep
  // cost does not depend on the grid sizes.
  std::vector<Eigen::MatrixXd> B(static_cast<std::size_t>(n));
  std::vector<Eigen::MatrixXd> G(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> bty(static_cast<std::size_t>(n));
  Eigen::VectorXd yty(n);
  Eigen::Index signal_streams = 0;
  for (int i = 0; i < n; ++i) {
    const Curve& c = data.curves[static_cast<std::size_t>(i)];
    B[static_cast<std::size_t>(i)] = evaluate_basis(basis, c.t);
    G[static_cast<std::size_t>(i)].noalias() =
        B[static_cast<std::size_t>(i)].transpose() * B[static_cast<std::size_t>(i)];
    bty[static_cast<std::size_t>(i)].noalias() =
        B[static_cast<std::size_t>(i)].transpose() * c.y;
    yty[i] = c.y.squaredNorm();
    signal_streams += c.t.size();
  }
  const bool track_ref = sopt.track_reference && reference_grid.size() > 0;
  const bool track_signals = sopt.track_signals;
  Eigen::MatrixXd B_ref;
  if (track_ref) B_ref = evaluate_basis(basis, reference_grid);
  const Eigen::Index R = track_ref ? reference_grid.size() : 0;

  McmcState st = init;

  const int total_sweeps = cfg.burn_in + cfg.posterior_samples;
  const int draws = (cfg.posterior_samples + cfg.thinning - 1) / cfg.thinning;

  ChainResult out;
  out.chain_index = chain_index;
  out.sigma_eps2_trace.reserve(static_cast<std::size_t>(draws));
  out.sigma_s2_trace.reserve(static_cast<std::size_t>(draws));
  out.trace_sigma_zeta_trace.reserve(static_cast<std::size_t>(draws));
  out.zeta_first_trace.reserve(static_cast<std::size_t>(draws));
  out.zeta_mid_trace.reserve(static_cast<std::size_t>(draws));
  out.gof_t_trace.reserve(static_cast<std::size_t>(draws));
  out.gof_t_curve.resize(n, draws);
  out.zeta_mean = Eigen::MatrixXd::Zero(n, K);
  out.mu_zeta_mean = Eigen::VectorXd::Zero(K);
  out.sigma_zeta_mean = Eigen::MatrixXd::Zero(K, K);
  if (track_signals) out.signals = ReservoirBank(sopt.reservoir_capacity, signal_streams);
  if (track_ref) {
    out.mu_ref = ReservoirBank(sopt.reservoir_capacity, R);
    out.sigma_ref = ReservoirBank(sopt.reservoir_capacity, upper_triangle_size(R));
  }
  out.sigma_tau = ReservoirBank(sopt.reservoir_capacity, upper_triangle_size(K));

  RngStream chain_rng = RngStream::keyed(cfg.seed, {stream_tag::chain,
                                                    static_cast<std::uint64_t>(chain_index)});
  RngStream summary_rng = RngStream::keyed(cfg.seed, {stream_tag::summary,
                                                      static_cast<std::uint64_t>(chain_index)});

  const int mid_row = (n + 1) / 2 - 1;
  const int mid_col = (K + 1) / 2 - 1;

  // Workspaces reused across sweeps.
  Eigen::MatrixXd L_sz = safe_cholesky(st.sigma_zeta, "initial coefficient covariance").L;
  Eigen::MatrixXd linv(K, K), prec(K, K), vinv(K, K);
  Eigen::VectorXd prec_mu(K), rhs(K), zdraw(K);
  Eigen::LLT<Eigen::MatrixXd> llt_v(K);
  Eigen::VectorXd signal_row(signal_streams);
  Eigen::VectorXd rss_i(n);
  Eigen::VectorXd mu_ref_row, sigma_ref_row, sigma_tau_row;
  Eigen::MatrixXd surf_ws;
  if (track_ref) {
    mu_ref_row.resize(R);
    sigma_ref_row.resize(upper_triangle_size(R));
  }
  sigma_tau_row.resize(upper_triangle_size(K));
  std::normal_distribution<double> nd;

  for (int sweep = 0; sweep < total_sweeps; ++sweep) {
    try {
      // Precision of the current coefficient covariance, from its factor.
      linv = L_sz.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(K, K));
      prec.noalias() = linv.transpose() * linv;
      prec_mu.noalias() = prec * st.mu_zeta;
      const double inv_s2 = 1.0 / st.sigma_eps2;

      // Step 1: coefficient rows, one independent substream per curve.
      for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        RngStream rng_i = RngStream::keyed(
            cfg.seed, {stream_tag::curve, static_cast<std::uint64_t>(chain_index),
                       static_cast<std::uint64_t>(sweep),
                       static_cast<std::uint64_t>(data.curves[ui].id)});
        vinv = prec;
        vinv.noalias() += inv_s2 * G[ui];
        llt_v.compute(vinv);
        if (llt_v.info() != Eigen::Success)
          throw std::runtime_error("coefficient conditional precision not positive definite");
        const auto& L_v = llt_v.matrixLLT();
        rhs = inv_s2 * bty[ui] + prec_mu;
        L_v.triangularView<Eigen::Lower>().solveInPlace(rhs);
        L_v.transpose().triangularView<Eigen::Upper>().solveInPlace(rhs);
        for (int k = 0; k < K; ++k) zdraw[k] = nd(rng_i);
        L_v.transpose().triangularView<Eigen::Upper>().solveInPlace(zdraw);
        st.zeta.row(i) = (rhs + zdraw).transpose();
      }

      // Step 2: population mean, then population covariance.
      {
        Eigen::VectorXd mean = (st.zeta.colwise().sum().transpose() + prior.c * prior.m0_zeta) /
                               (n + prior.c);
        for (int k = 0; k < K; ++k) zdraw[k] = nd(chain_rng);
        st.mu_zeta = mean + (L_sz.triangularView<Eigen::Lower>() * zdraw) /
                                std::sqrt(n + prior.c);
      }
      st.sigma_zeta = sample_sigma_zeta(st.zeta, st.mu_zeta, prior.m0_zeta, prior.c, prior.delta,
                                        st.sigma_s2 * prior.psi_transform, chain_rng);

      // Step 3: reconstructed signals and residuals.
      double rss = 0.0;
      Eigen::Index offset = 0;
      for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const Eigen::Index p_i = data.curves[ui].t.size();
        signal_row.segment(offset, p_i).noalias() = B[ui] * st.zeta.row(i).transpose();
        rss_i[i] = (data.curves[ui].y - signal_row.segment(offset, p_i)).squaredNorm();
        rss += rss_i[i];
        offset += p_i;
      }

      // Step 4: noise variance.
      st.sigma_eps2 = sample_sigma_eps(rss, total_points, hp.a_eps, hp.b_eps, chain_rng);

      // Step 5: prior scale, using the refreshed covariance factor.
      L_sz = safe_cholesky(st.sigma_zeta, "coefficient covariance").L;
      const double trace_term =
          L_sz.triangularView<Eigen::Lower>().solve(L_a).squaredNorm();
      st.sigma_s2 = sample_sigma_s_from_trace(trace_term, K, prior.delta, hp.a_s, hp.b_s,
                                              chain_rng);

      // Retention.
      const int rel = sweep - cfg.burn_in;
      if (rel >= 0 && rel % cfg.thinning == 0) {
        out.sigma_eps2_trace.push_back(st.sigma_eps2);
        out.sigma_s2_trace.push_back(st.sigma_s2);
        out.trace_sigma_zeta_trace.push_back(st.sigma_zeta.trace());
        out.zeta_first_trace.push_back(st.zeta(0, 0));
        out.zeta_mid_trace.push_back(st.zeta(mid_row, mid_col));
        out.gof_t_trace.push_back(rss / st.sigma_eps2);
        out.gof_t_curve.col(out.retained) = rss_i / st.sigma_eps2;

        const double w = 1.0 / static_cast<double>(out.retained + 1);
        out.zeta_mean += w * (st.zeta - out.zeta_mean);
        out.mu_zeta_mean += w * (st.mu_zeta - out.mu_zeta_mean);
        out.sigma_zeta_mean += w * (st.sigma_zeta - out.sigma_zeta_mean);

        out.signals.add(signal_row, summary_rng);
        if (track_ref) {
          mu_ref_row.noalias() = B_ref * st.mu_zeta;
          out.mu_ref.add(mu_ref_row, summary_rng);
          surf_ws.noalias() = B_ref * st.sigma_zeta * B_ref.transpose();
          Eigen::Index idx = 0;
          for (Eigen::Index a = 0; a < R; ++a)
            for (Eigen::Index b = a; b < R; ++b) sigma_ref_row[idx++] = surf_ws(a, b);
          out.sigma_ref.add(sigma_ref_row, summary_rng);
        }
        surf_ws.noalias() = basis.B_tau * st.sigma_zeta * basis.B_tau.transpose();
        Eigen::Index idx = 0;
        for (Eigen::Index a = 0; a < K; ++a)
          for (Eigen::Index b = a; b < K; ++b) sigma_tau_row[idx++] = surf_ws(a, b);
        out.sigma_tau.add(sigma_tau_row, summary_rng);

        ++out.retained;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("chain " + std::to_string(chain_index) + ", sweep " +
                               std::to_string(sweep) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace babf
