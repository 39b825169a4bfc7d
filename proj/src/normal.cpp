#include "bestlds/normal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace bestlds::normal {
namespace {

// 20-point Gauss-Legendre rule on [-1, 1], positive half.
constexpr std::array<double, 10> kGlWeights = {
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
    0.1019301198172404,  0.1181945319615184,  0.1316886384491766,  0.1420961093183821,
    0.1491729864726037,  0.1527533871307259};
constexpr std::array<double, 10> kGlNodes = {
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188,
    0.7463319064601508, 0.6360536807265150, 0.5108670019508271, 0.3737060887154196,
    0.2277858511416451, 0.07652652113349733};

// Mills ratio cdf(-t) / pdf(t) for large positive t by continued fraction.
double mills_ratio_cf(double t) {
  double f = t;
  for (int n = 60; n >= 1; --n) f = t + n / f;
  return 1.0 / f;
}

constexpr double kTailSwitch = -30.0;

}  // namespace

double pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  double x = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
  // One Newton step on cdf(x) - p tightens the last ulps.
  const double f = cdf(x) - p;
  const double d = pdf(x);
  if (d > 0.0) x -= f / d;
  return x;
}

double log_cdf(double x) {
  if (x > kTailSwitch) return std::log(cdf(x));
  const double t = -x;
  return -0.5 * t * t - 0.5 * kLog2Pi + std::log(mills_ratio_cf(t));
}

double inv_mills(double x) {
  if (x > kTailSwitch) return pdf(x) / cdf(x);
  return 1.0 / mills_ratio_cf(-x);
}

double bivariate_upper(double h, double k, double r) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (std::isinf(h) && h > 0) return 0.0;
  if (std::isinf(k) && k > 0) return 0.0;
  if (std::isinf(h) && h < 0) return std::isinf(k) && k < 0 ? 1.0 : cdf(-k);
  if (std::isinf(k) && k < 0) return cdf(-h);
  if (r == 0.0) return cdf(-h) * cdf(-k);

  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = 0.5 * std::asin(r);
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
      for (const double sign : {-1.0, 1.0}) {
        const double sn = std::sin(asr * (1.0 + sign * kGlNodes[i]));
        bvn += kGlWeights[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / kTwoPi + cdf(-h) * cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (std::abs(r) < 1.0) {
      const double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 80.0;
      double asr = -0.5 * (bs / as + hk);
      if (asr > -100.0) {
        bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
      }
      if (hk > -100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(kTwoPi) * cdf(-b / a);
        bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
      }
      a *= 0.5;
      for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
        for (const double sign : {-1.0, 1.0}) {
          const double xi = a * (1.0 + sign * kGlNodes[i]);
          const double xs = xi * xi;
          asr = -0.5 * (bs / xs + hk);
          if (asr > -100.0) {
            const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
            const double rs = std::sqrt(1.0 - xs);
            const double ep = std::exp(-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
            bvn += a * kGlWeights[i] * std::exp(asr) * (ep - sp);
          }
        }
      }
      bvn = -bvn / kTwoPi;
    }
    if (r > 0.0) {
      bvn += cdf(-std::max(h, k));
    } else if (h >= k) {
      bvn = -bvn;
    } else {
      const double l = h < 0.0 ? cdf(k) - cdf(h) : cdf(-h) - cdf(-k);
      bvn = l - bvn;
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

double bivariate_orthant(double mu_i, double mu_j, double rho) {
  rho = std::clamp(rho, -1.0, 1.0);
  return bivariate_upper(-mu_i, -mu_j, rho);
}

double truncated_moment(double mu) { return mu * cdf(mu) + pdf(mu); }

double truncated_moment_erf(double mu, double var) {
  const double sd = std::sqrt(var);
  return 0.5 * mu * (1.0 + std::erf(mu / (std::numbers::sqrt2 * sd))) +
         sd * kInvSqrt2Pi * std::exp(-0.5 * mu * mu / var);
}

}  // namespace bestlds::normal
