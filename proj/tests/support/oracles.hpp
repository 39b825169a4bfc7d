#pragma once

// Reference computations used by the tests. Each one is written from first
// principles and shares no code path with the library routine it checks.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bestlds/model.hpp"

namespace oracle {

using bestlds::Mat;
using bestlds::Vec;

inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

/// P = sum_j A^j Q A^j^T, truncated once the terms vanish.
inline Mat stationary_cov_series(const Mat& a, const Mat& q) {
  Mat p = q;
  Mat term = q;
  for (int j = 0; j < 20000; ++j) {
    term = a * term * a.transpose();
    p += term;
    if (term.cwiseAbs().maxCoeff() < 1e-17) break;
  }
  return p;
}

/// Cov(z_{t+lag}, z_t) under stationarity with white inputs of covariance su.
inline Mat output_lag_cov(const bestlds::SystemParams& s, const Mat& su, int lag) {
  const Mat p = stationary_cov_series(s.A, s.Q + s.B * su * s.B.transpose());
  if (lag == 0) return s.C * p * s.C.transpose() + s.D * su * s.D.transpose();
  Mat apow = Mat::Identity(s.A.rows(), s.A.cols());
  for (int i = 0; i < lag - 1; ++i) apow = apow * s.A;
  return s.C * apow * s.A * p * s.C.transpose() + s.C * apow * s.B * su * s.D.transpose();
}

/// Correlation-scale version for the probit pair z + eps, eps ~ N(0, 1):
/// every entry divided by sqrt((1 + v_i)(1 + v_j)), v = diag Cov(z_t).
inline Mat probit_scale(const Mat& cov, const Vec& v) {
  Mat out = cov;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) out(i, j) /= std::sqrt((1.0 + v(i)) * (1.0 + v(j)));
  }
  return out;
}

/// P(X >= 0, Y >= 0) for unit normals with means mu_i, mu_j and correlation
/// rho, by conditioning on X and adaptive Gauss-Kronrod over its half line.
inline double orthant_quadrature(double mu_i, double mu_j, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  auto f = [&](double t) {
    const double x = t + mu_i;  // X = mu_i + t, t standard normal
    return phi_pdf(t) * phi_cdf((mu_j + rho * t) / s) * (x >= 0.0 ? 1.0 : 0.0);
  };
  // Split at the indicator's kink and at the conditional-mean transition.
  std::vector<double> cuts{-mu_i};
  const double knee = -mu_j / rho;
  if (std::abs(rho) > 1e-12 && knee > -mu_i && knee < 12.0) cuts.push_back(knee);
  cuts.push_back(std::max(12.0, -mu_i + 1.0));
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 12, 1e-13);
  }
  return total;
}

/// Exact log p(y | u) in nats for p = 1, q = 1 by a dense-grid forward pass
/// over [-half_width, half_width]. The grid step must resolve sqrt(Q).
inline double grid_log_evidence(const bestlds::SystemParams& s, const Mat& u, const Mat& y, int grid = 4001,
                                double half_width = 10.0) {
  const double a = s.A(0, 0), c = s.C(0, 0), q = s.Q(0, 0);
  const double m0 = s.mu0(0), v0 = s.Q0(0, 0);
  const double lo = -half_width, hi = half_width;
  const double h = (hi - lo) / (grid - 1);
  Vec xs(grid);
  for (int i = 0; i < grid; ++i) xs(i) = lo + h * i;
  auto gauss = [](double x, double mean, double var) {
    return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
  };
  auto lik = [&](Eigen::Index t, double x) {
    double z = c * x;
    for (Eigen::Index j = 0; j < u.cols(); ++j) z += s.D(0, j) * u(t, j);
    return y(t, 0) > 0.5 ? phi_cdf(z) : phi_cdf(-z);
  };
  Vec alpha(grid);
  for (int i = 0; i < grid; ++i) alpha(i) = gauss(xs(i), m0, v0) * lik(0, xs(i));
  double log_scale = 0.0;
  for (Eigen::Index t = 1; t < y.rows(); ++t) {
    const double norm = alpha.sum() * h;
    log_scale += std::log(norm);
    alpha /= norm;
    Vec next = Vec::Zero(grid);
    for (int j = 0; j < grid; ++j) {
      double drift = 0.0;
      for (Eigen::Index k = 0; k < u.cols(); ++k) drift += s.B(0, k) * u(t - 1, k);
      double acc = 0.0;
      for (int i = 0; i < grid; ++i) acc += alpha(i) * gauss(xs(j), a * xs(i) + drift, q);
      next(j) = acc * h * lik(t, xs(j));
    }
    alpha = next;
  }
  return log_scale + std::log(alpha.sum() * h);
}

/// x -> T x applied to (A, B, C, Q, mu0, Q0); D unchanged.
inline bestlds::SystemParams similarity(const bestlds::SystemParams& s, const Mat& t) {
  const Mat ti = t.inverse();
  bestlds::SystemParams o = s;
  o.A = t * s.A * ti;
  o.B = t * s.B;
  o.C = s.C * ti;
  o.Q = t * s.Q * t.transpose();
  o.Q = 0.5 * (o.Q + o.Q.transpose());
  o.mu0 = t * s.mu0;
  o.Q0 = t * s.Q0 * t.transpose();
  o.Q0 = 0.5 * (o.Q0 + o.Q0.transpose());
  return o;
}

inline Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  }
  return m;
}

/// Random invertible transform with condition number below 50.
inline Mat well_conditioned(Eigen::Index n, std::mt19937_64& rng) {
  for (;;) {
    const Mat t = gaussian_matrix(n, n, rng) + 2.0 * Mat::Identity(n, n);
    Eigen::JacobiSVD<Mat> svd(t);
    const Vec sv = svd.singularValues();
    if (sv(n - 1) > 0.0 && sv(0) / sv(n - 1) < 50.0) return t;
  }
}

/// Random stable system with spectral radius in [0.3, 0.9].
inline bestlds::SystemParams random_stable(const bestlds::Dimensions& d, std::mt19937_64& rng) {
  bestlds::SystemParams s = bestlds::SystemParams::zeros(d);
  std::uniform_real_distribution<double> radius(0.3, 0.9);
  Mat a = gaussian_matrix(d.p, d.p, rng);
  const double rho = a.eigenvalues().cwiseAbs().maxCoeff();
  s.A = a * (radius(rng) / rho);
  s.B = gaussian_matrix(d.p, d.m, rng, 0.5);
  s.C = gaussian_matrix(d.q, d.p, rng, 0.5);
  s.D = gaussian_matrix(d.q, d.m, rng, 0.3);
  const Mat l = gaussian_matrix(d.p, d.p, rng, 0.3);
  s.Q = l * l.transpose() + 0.1 * Mat::Identity(d.p, d.p);
  s.mu0 = Vec::Zero(d.p);
  s.Q0 = stationary_cov_series(s.A, s.Q);
  return s;
}

}  // namespace oracle
