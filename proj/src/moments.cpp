#include "bestlds/moments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "bestlds/errors.hpp"
#include "bestlds/log.hpp"
#include "bestlds/normal.hpp"

namespace bestlds {
namespace {

using Segments = std::vector<std::pair<Eigen::Index, Eigen::Index>>;

void check_segments(const Segments& segments, int k) {
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const Eigen::Index len = segments[s].second - segments[s].first;
    if (len < 2 * k) {
      std::ostringstream msg;
      msg << "trial segment " << s << " [" << segments[s].first << ", " << segments[s].second << ") has "
          << len << " steps; Hankel depth k=" << k << " needs at least " << 2 * k;
      throw ConfigError(msg.str());
    }
  }
}

// Sum over t of a_t b_{t+lag}^T for pairs inside one segment.
Mat lagged_sum(const Mat& a, const Mat& b, Eigen::Index begin, Eigen::Index len, int lag) {
  const Eigen::Index shift = std::abs(lag);
  const Eigen::Index count = len - shift;
  if (lag >= 0) return a.middleRows(begin, count).transpose() * b.middleRows(begin + shift, count);
  return a.middleRows(begin + shift, count).transpose() * b.middleRows(begin, count);
}

StackedMoments pooled_moments(const Mat& u, const Mat& w, const Segments& segments, int k) {
  const int q = static_cast<int>(w.cols());
  const int m = static_cast<int>(u.cols());
  const int span = 2 * k;

  Vec mean_w = Vec::Zero(q);
  Vec mean_u = Vec::Zero(m);
  Eigen::Index total = 0;
  for (const auto& [b, e] : segments) {
    mean_w += w.middleRows(b, e - b).colwise().sum().transpose();
    mean_u += u.middleRows(b, e - b).colwise().sum().transpose();
    total += e - b;
  }
  mean_w /= static_cast<double>(total);
  mean_u /= static_cast<double>(total);

  // ww[l] = E[w_t w_{t+l}^T], uu[l] likewise, wu[d + span - 1] = E[w_t u_{t+d}^T]
  std::vector<Mat> ww(span, Mat::Zero(q, q)), uu(span, Mat::Zero(m, m));
  std::vector<Mat> wu(2 * span - 1, Mat::Zero(q, m));
  for (int lag = 0; lag < span; ++lag) {
    Eigen::Index count = 0;
    for (const auto& [b, e] : segments) {
      ww[lag] += lagged_sum(w, w, b, e - b, lag);
      if (m > 0) uu[lag] += lagged_sum(u, u, b, e - b, lag);
      count += e - b - lag;
    }
    ww[lag] /= static_cast<double>(count);
    uu[lag] /= static_cast<double>(count);
  }
  if (m > 0) {
    for (int d = -(span - 1); d < span; ++d) {
      Eigen::Index count = 0;
      Mat& acc = wu[d + span - 1];
      for (const auto& [b, e] : segments) {
        acc += lagged_sum(w, u, b, e - b, d);
        count += e - b - std::abs(d);
      }
      acc /= static_cast<double>(count);
    }
  }

  StackedMoments sm;
  sm.k = k;
  sm.q = q;
  sm.m = m;
  sm.lag_pooled = true;
  sm.mu_y = mean_w.replicate(span, 1);
  sm.mu_u = mean_u.replicate(span, 1);
  sm.Eyy.resize(span * q, span * q);
  sm.Suu.resize(span * m, span * m);
  sm.Eyu.resize(span * q, span * m);
  const Mat uu_mean = mean_u * mean_u.transpose();
  for (int a = 0; a < span; ++a) {
    for (int c = 0; c < span; ++c) {
      const int lag = c - a;
      sm.Eyy.block(a * q, c * q, q, q) = lag >= 0 ? ww[lag] : Mat(ww[-lag].transpose());
      if (m > 0) {
        sm.Suu.block(a * m, c * m, m, m) = (lag >= 0 ? uu[lag] : Mat(uu[-lag].transpose())) - uu_mean;
        sm.Eyu.block(a * q, c * m, q, m) = wu[lag + span - 1];
      }
    }
  }
  // lag-0 blocks are symmetric in exact arithmetic
  sm.Eyy = linalg::symmetrize(sm.Eyy);
  if (m > 0) sm.Suu = linalg::symmetrize(sm.Suu);
  for (const auto& [b, e] : segments) sm.n_windows += e - b - span + 1;
  return sm;
}

StackedMoments windowed_moments(const Mat& u, const Mat& w, const Segments& segments, int k) {
  const int q = static_cast<int>(w.cols());
  const int m = static_cast<int>(u.cols());
  const int span = 2 * k;
  StackedMoments sm;
  sm.k = k;
  sm.q = q;
  sm.m = m;
  sm.mu_y = Vec::Zero(span * q);
  sm.mu_u = Vec::Zero(span * m);
  sm.Eyy = Mat::Zero(span * q, span * q);
  Mat euu = Mat::Zero(span * m, span * m);
  sm.Eyu = Mat::Zero(span * q, span * m);
  for (const auto& [b, e] : segments) {
    const Eigen::Index windows = e - b - span + 1;
    sm.n_windows += windows;
    for (int a = 0; a < span; ++a) {
      sm.mu_y.segment(a * q, q) += w.middleRows(b + a, windows).colwise().sum().transpose();
      if (m > 0) sm.mu_u.segment(a * m, m) += u.middleRows(b + a, windows).colwise().sum().transpose();
      for (int c = 0; c < span; ++c) {
        sm.Eyy.block(a * q, c * q, q, q) +=
            w.middleRows(b + a, windows).transpose() * w.middleRows(b + c, windows);
        if (m > 0) {
          euu.block(a * m, c * m, m, m) += u.middleRows(b + a, windows).transpose() * u.middleRows(b + c, windows);
          sm.Eyu.block(a * q, c * m, q, m) += w.middleRows(b + a, windows).transpose() * u.middleRows(b + c, windows);
        }
      }
    }
  }
  const double n = static_cast<double>(sm.n_windows);
  sm.mu_y /= n;
  sm.mu_u /= n;
  sm.Eyy /= n;
  sm.Eyu /= n;
  sm.Suu = linalg::symmetrize(euu / n - sm.mu_u * sm.mu_u.transpose());
  sm.Eyy = linalg::symmetrize(sm.Eyy);
  return sm;
}

}  // namespace

void HankelConfig::validate(std::optional<int> p) const {
  if (k < 1) throw ConfigError("Hankel depth k must be >= 1");
  if (p && *p > k) {
    std::ostringstream msg;
    msg << "Hankel depth k=" << k << " must be >= latent dimension p=" << *p;
    throw ConfigError(msg.str());
  }
}

StackedMoments build_hankel_moments_real(const Mat& u, const Mat& outputs, const Segments& segments,
                                         const HankelConfig& cfg) {
  cfg.validate();
  if (u.rows() != outputs.rows()) throw ParameterError("inputs and outputs differ in length");
  check_segments(segments, cfg.k);
  return cfg.pool_lags ? pooled_moments(u, outputs, segments, cfg.k)
                       : windowed_moments(u, outputs, segments, cfg.k);
}

StackedMoments build_hankel_moments(const TimeSeries& ts, const HankelConfig& cfg) {
  ts.validate();
  return build_hankel_moments_real(ts.u, ts.y, ts.segments(), cfg);
}

double latent_mean_from_rate(double rate, int channel) {
  if (!(rate > 0.0 && rate < 1.0)) {
    std::ostringstream msg;
    msg << "channel " << channel << " has rate " << rate << "; all-0 or all-1 outputs carry no latent mean";
    throw DegenerateChannelError(msg.str(), channel);
  }
  return normal::quantile(rate);
}

double latent_corr_robust(double e_yiyj, double mu_i, double mu_j) {
  const double lo = -1.0 + kRobustRhoMargin;
  const double hi = 1.0 - kRobustRhoMargin;
  auto objective = [&](double rho) { return std::abs(normal::bivariate_orthant(mu_i, mu_j, rho) - e_yiyj); };
  if (e_yiyj >= normal::bivariate_orthant(mu_i, mu_j, hi)) return hi;
  if (e_yiyj <= normal::bivariate_orthant(mu_i, mu_j, lo)) return lo;
  std::uintmax_t iters = 200;
  const auto [rho, value] = boost::math::tools::brent_find_minima(objective, lo, hi, 52, iters);
  (void)value;
  return rho;
}

double latent_corr_from_pair(double e_yiyj, double mu_i, double mu_j, bool* used_fallback) {
  if (used_fallback) *used_fallback = false;
  auto f = [&](double rho) { return normal::bivariate_orthant(mu_i, mu_j, rho) - e_yiyj; };
  const double f_lo = f(-1.0);
  const double f_hi = f(1.0);
  auto fallback = [&] {
    if (used_fallback) *used_fallback = true;
    return latent_corr_robust(e_yiyj, mu_i, mu_j);
  };
  if (f_lo > 0.0 || f_hi < 0.0) return fallback();
  if (f_lo == 0.0) return -1.0;
  if (f_hi == 0.0) return 1.0;

  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15; };
  const auto [a, b] = boost::math::tools::toms748_solve(f, -1.0, 1.0, f_lo, f_hi, tol, iters);
  const double fa = std::abs(f(a));
  const double fb = std::abs(f(b));
  const double rho = fa <= fb ? a : b;
  if (std::min(fa, fb) > 1e-9) return fallback();
  return rho;
}

double cross_cov_entry(double e_yiuj, double mu_u_j, double mu_i, int channel) {
  const double density = normal::pdf(mu_i);
  if (density < 1e-12) {
    std::ostringstream msg;
    msg << "channel " << channel << " is saturated (latent mean " << mu_i << "); cross-covariance is unidentified";
    throw DegenerateChannelError(msg.str(), channel);
  }
  return (e_yiuj - mu_u_j * normal::cdf(mu_i)) / density;
}

ConvertedMoments finalize_moments(int k, int q, int m, Vec mu, Mat sigma) {
  ConvertedMoments cm;
  cm.k = k;
  cm.q = q;
  cm.m = m;
  cm.mu = std::move(mu);
  auto repair = linalg::nearest_psd(sigma, kPsdFloor);
  cm.min_eigenvalue = repair.min_eigenvalue;
  cm.repaired = repair.repaired;
  cm.Sigma = std::move(repair.matrix);
  try {
    cm.R = linalg::lower_cholesky(cm.Sigma);
  } catch (const NumericalError& e) {
    std::ostringstream msg;
    msg << e.what() << "; minimum eigenvalue before repair " << cm.min_eigenvalue;
    throw NumericalError(msg.str());
  }
  return cm;
}

ConvertedMoments convert(const StackedMoments& sm) {
  const int span = 2 * sm.k;
  const Eigen::Index nz = static_cast<Eigen::Index>(span) * sm.q;
  const Eigen::Index nu = static_cast<Eigen::Index>(span) * sm.m;
  const double n = static_cast<double>(std::max<Eigen::Index>(sm.n_windows, 1));
  const double rate_floor = 0.5 / n;

  int clamped = 0;
  Vec mu_z(nz);
  for (Eigen::Index r = 0; r < nz; ++r) {
    double rate = sm.mu_y(r);
    if (rate <= 0.0 || rate >= 1.0) {
      const double fixed = std::clamp(rate, rate_floor, 1.0 - rate_floor);
      std::ostringstream msg;
      msg << "output channel " << r % sm.q << " has rate " << rate << "; clamped to " << fixed;
      warn(msg.str());
      rate = fixed;
      ++clamped;
    }
    mu_z(r) = latent_mean_from_rate(rate, static_cast<int>(r % sm.q));
  }

  int fallbacks = 0;
  auto solve = [&](Eigen::Index r, Eigen::Index c) {
    bool fb = false;
    const double rho = latent_corr_from_pair(sm.Eyy(r, c), mu_z(r), mu_z(c), &fb);
    fallbacks += fb ? 1 : 0;
    return rho;
  };

  Mat szz = Mat::Identity(nz, nz);
  if (sm.lag_pooled) {
    // one solve per (lag, i, j); replicate along the block diagonals
    const int q = sm.q;
    for (int lag = 0; lag < span; ++lag) {
      Mat block = Mat::Identity(q, q);
      for (int i = 0; i < q; ++i) {
        for (int j = lag == 0 ? i + 1 : 0; j < q; ++j) {
          block(i, j) = solve(i, static_cast<Eigen::Index>(lag) * q + j);
          if (lag == 0) block(j, i) = block(i, j);
        }
      }
      for (int a = 0; a + lag < span; ++a) {
        szz.block(a * q, (a + lag) * q, q, q) = block;
        szz.block((a + lag) * q, a * q, q, q) = block.transpose();
      }
    }
  } else {
    for (Eigen::Index r = 0; r < nz; ++r) {
      for (Eigen::Index c = r + 1; c < nz; ++c) {
        szz(r, c) = szz(c, r) = solve(r, c);
      }
    }
  }

  Mat suz(nu, nz);
  for (Eigen::Index c = 0; c < nz; ++c) {
    for (Eigen::Index r = 0; r < nu; ++r) {
      suz(r, c) = cross_cov_entry(sm.Eyu(c, r), sm.mu_u(r), mu_z(c), static_cast<int>(c % sm.q));
    }
  }

  Mat sigma(nu + nz, nu + nz);
  sigma.topLeftCorner(nu, nu) = sm.Suu;
  sigma.topRightCorner(nu, nz) = suz;
  sigma.bottomLeftCorner(nz, nu) = suz.transpose();
  sigma.bottomRightCorner(nz, nz) = szz;
  Vec mu(nu + nz);
  mu << sm.mu_u, mu_z;

  ConvertedMoments cm = finalize_moments(sm.k, sm.q, sm.m, std::move(mu), std::move(sigma));
  cm.robust_fallbacks = fallbacks;
  cm.clamped_rates = clamped;
  cm.lag_pooled = sm.lag_pooled;
  if (fallbacks > 0) {
    std::ostringstream msg;
    msg << fallbacks << " latent correlations were outside the attainable orthant range and were fitted by "
        << "bounded minimisation";
    warn(msg.str());
  }
  return cm;
}

ConvertedMoments gaussian_moments(const StackedMoments& sm) {
  const Eigen::Index nz = 2 * static_cast<Eigen::Index>(sm.k) * sm.q;
  const Eigen::Index nu = 2 * static_cast<Eigen::Index>(sm.k) * sm.m;
  Mat sigma(nu + nz, nu + nz);
  const Mat szz = sm.Eyy - sm.mu_y * sm.mu_y.transpose();
  const Mat suz = sm.Eyu.transpose() - sm.mu_u * sm.mu_y.transpose();
  sigma.topLeftCorner(nu, nu) = sm.Suu;
  sigma.topRightCorner(nu, nz) = suz;
  sigma.bottomLeftCorner(nz, nu) = suz.transpose();
  sigma.bottomRightCorner(nz, nz) = szz;
  Vec mu(nu + nz);
  mu << sm.mu_u, sm.mu_y;
  ConvertedMoments cm = finalize_moments(sm.k, sm.q, sm.m, std::move(mu), std::move(sigma));
  cm.lag_pooled = sm.lag_pooled;
  return cm;
}

}  // namespace bestlds
