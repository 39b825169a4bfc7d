#pragma once

// Univariate and bivariate standard-normal primitives used by the probit
// moment conversion and the Laplace approximation.

namespace bestlds::normal {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLog2Pi = 1.83787706640934548356;

double pdf(double x);
double cdf(double x);
/// Inverse of cdf on (0, 1).
double quantile(double p);

/// log cdf(x), accurate in the far left tail.
double log_cdf(double x);

/// Inverse Mills ratio pdf(x) / cdf(x), stable for very negative x.
double inv_mills(double x);

/// P(z_i >= 0, z_j >= 0) for unit-variance normals with means (mu_i, mu_j)
/// and correlation rho. Drezner-Wesolowsky integrand, 20-node Gauss-Legendre.
double bivariate_orthant(double mu_i, double mu_j, double rho);

/// Upper bivariate tail P(X > h, Y > k) for standard normals, correlation r.
double bivariate_upper(double h, double k, double r);

/// E[z 1{z >= 0}] for z ~ N(mu, 1), i.e. mu * cdf(mu) + pdf(mu).
double truncated_moment(double mu);

/// E[z 1{z >= 0}] for z ~ N(mu, var) written with erf.
double truncated_moment_erf(double mu, double var);

}  // namespace bestlds::normal
