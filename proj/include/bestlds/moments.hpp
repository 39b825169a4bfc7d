#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "bestlds/linalg.hpp"
#include "bestlds/model.hpp"

namespace bestlds {

struct HankelConfig {
  int k = 1;  ///< Hankel depth: past and future blocks each hold k steps
  /// Estimate every lag statistic once from all pairs at that lag and
  /// replicate it across the block-Toeplitz positions. When false each cell
  /// is averaged over the 2k-step windows separately.
  bool pool_lags = true;

  /// Throws ConfigError; p (when known) must not exceed k.
  void validate(std::optional<int> p = std::nullopt) const;
};

/// Sample moments of the stacked window (u_t..u_{t+2k-1}, y_t..y_{t+2k-1}).
/// Stacked index of step a, channel i is a * q + i (a * m + j for inputs).
struct StackedMoments {
  int k = 0, q = 0, m = 0;
  Vec mu_u;  ///< 2km
  Vec mu_y;  ///< 2kq
  Mat Eyy;   ///< 2kq x 2kq raw second moments E[y y^T]
  Mat Suu;   ///< 2km x 2km centred input covariance
  Mat Eyu;   ///< 2kq x 2km raw cross moments E[y u^T]
  Eigen::Index n_windows = 0;
  bool lag_pooled = false;
};

/// Joint Gaussian moments of (u_p, u_f, z_p, z_f) and the Cholesky factor.
struct ConvertedMoments {
  int k = 0, q = 0, m = 0;
  Vec mu;     ///< 2km + 2kq
  Mat Sigma;  ///< blocks [[S_uu, S_uz], [S_zu, S_zz]]
  Mat R;      ///< lower triangular, R R^T = Sigma
  double min_eigenvalue = 0.0;  ///< of Sigma before any PSD repair
  bool repaired = false;
  int robust_fallbacks = 0;  ///< correlations solved by bounded minimisation
  int clamped_rates = 0;     ///< saturated rates moved off {0, 1}
  bool lag_pooled = false;

  Eigen::Index input_rows() const { return 2 * k * m; }
  Eigen::Index output_rows() const { return 2 * k * q; }
};

/// Moments of binary outputs. Every trial segment must span >= 2k steps.
StackedMoments build_hankel_moments(const TimeSeries& ts, const HankelConfig& cfg);

/// Same estimator for arbitrary real outputs (Gaussian baseline, direct-z runs).
StackedMoments build_hankel_moments_real(const Mat& u, const Mat& outputs,
                                         const std::vector<std::pair<Eigen::Index, Eigen::Index>>& segments,
                                         const HankelConfig& cfg);

/// Phi^{-1}(rate) under the unit-variance convention. rate must lie in (0, 1).
double latent_mean_from_rate(double rate, int channel = -1);

/// Correlation rho with bivariate_orthant(mu_i, mu_j, rho) = e_yiyj. Falls
/// back to latent_corr_robust when the target is outside the attainable range
/// or the bracketed solve does not reach 1e-9.
double latent_corr_from_pair(double e_yiyj, double mu_i, double mu_j, bool* used_fallback = nullptr);

/// argmin over [-1 + 1e-6, 1 - 1e-6] of |bivariate_orthant(mu_i, mu_j, rho) - e_yiyj|.
double latent_corr_robust(double e_yiyj, double mu_i, double mu_j);

inline constexpr double kRobustRhoMargin = 1e-6;

/// Sigma^{uz}_{ji} = (E[y_i u_j] - mu^u_j Phi(mu_i)) / phi(mu_i).
double cross_cov_entry(double e_yiuj, double mu_u_j, double mu_i, int channel = -1);

/// Eigenvalue floor applied when the assembled Sigma is not PSD.
inline constexpr double kPsdFloor = 1e-10;

/// Probit moment conversion followed by PSD repair and Cholesky.
ConvertedMoments convert(const StackedMoments& sm);

/// Skips the probit conversion: Sigma is the plain centred covariance of
/// (u, outputs) as if the outputs were Gaussian.
ConvertedMoments gaussian_moments(const StackedMoments& sm);

/// Assembles mu/Sigma, repairs and factors. Shared by convert and
/// gaussian_moments; exposed for feeding externally computed covariances.
ConvertedMoments finalize_moments(int k, int q, int m, Vec mu, Mat sigma);

}  // namespace bestlds
