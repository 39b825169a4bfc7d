#include <random>

#include <gtest/gtest.h>

#include "bestlds/errors.hpp"
#include "bestlds/log.hpp"
#include "bestlds/metrics.hpp"
#include "bestlds/ssid.hpp"
#include "support/oracles.hpp"

namespace bestlds {
namespace {

class Ssid : public ::testing::Test {
 protected:
  void SetUp() override { previous_ = set_warning_sink({}); }
  void TearDown() override { set_warning_sink(previous_); }
  WarningSink previous_;
};

Mat matrix_power(const Mat& a, int n) {
  Mat out = Mat::Identity(a.rows(), a.cols());
  for (int i = 0; i < n; ++i) out = out * a;
  return out;
}

/// Exact stationary covariance of (u_p, u_f, z_p + e_p, z_f + e_f) for white
/// inputs with covariance su and white output noise of variance noise.
ConvertedMoments analytic_moments(const SystemParams& s, const Mat& su, int k, double noise) {
  const auto d = s.dims();
  const int span = 2 * k;
  const Eigen::Index nu = span * d.m, nz = span * d.q;
  Mat sigma = Mat::Zero(nu + nz, nu + nz);
  for (int a = 0; a < span; ++a) sigma.block(a * d.m, a * d.m, d.m, d.m) = su;
  for (int a = 0; a < span; ++a) {
    for (int b = 0; b < span; ++b) {
      Mat zu = Mat::Zero(d.q, d.m);
      if (a == b) zu = s.D * su;
      if (a > b) zu = s.C * matrix_power(s.A, a - b - 1) * s.B * su;
      sigma.block(nu + a * d.q, b * d.m, d.q, d.m) = zu;
      sigma.block(b * d.m, nu + a * d.q, d.m, d.q) = zu.transpose();
      Mat zz = a >= b ? oracle::output_lag_cov(s, su, a - b) : Mat(oracle::output_lag_cov(s, su, b - a).transpose());
      if (a == b) zz += noise * Mat::Identity(d.q, d.q);
      sigma.block(nu + a * d.q, nu + b * d.q, d.q, d.q) = zz;
    }
  }
  sigma = 0.5 * (sigma + sigma.transpose());
  return finalize_moments(k, d.q, d.m, Vec::Zero(nu + nz), sigma);
}

TEST_F(Ssid, CholeskyFactorReproducesSigma) {
  const Mat s = (Mat(3, 3) << 4, 2, 0.4, 2, 3, 0.5, 0.4, 0.5, 1).finished();
  const Mat r = cholesky_R(s);
  EXPECT_LT((r * r.transpose() - s).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(r(0, 0), 2.0, 1e-15);
}

TEST_F(Ssid, ExactMomentsRecoverTheSystem) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const SystemParams s = oracle::random_stable(Dimensions{2, 3, 2}, rng);
    const Mat su = Mat::Identity(2, 2);
    const ConvertedMoments cm = analytic_moments(s, su, 3, 1.0);
    const SsidResult fit = fit_from_moments(cm, 2, N4sidOptions{});
    EXPECT_LT((gain(fit.params) - gain(s)).cwiseAbs().maxCoeff(), 1e-8) << trial;
    EXPECT_LT(eig_error(s.A, fit.params.A), 1e-8) << trial;
    EXPECT_LT((fit.params.D - s.D).cwiseAbs().maxCoeff(), 1e-8) << trial;
    // the third singular value carries no signal
    EXPECT_LT(fit.singular_values[2], 1e-6 * fit.singular_values[0]) << trial;
  }
}

TEST_F(Ssid, StateRegressionRouteAgrees) {
  std::mt19937_64 rng(22);
  const SystemParams s = oracle::random_stable(Dimensions{2, 3, 1}, rng);
  const ConvertedMoments cm = analytic_moments(s, Mat::Identity(1, 1), 3, 1.0);
  N4sidOptions opt;
  opt.a_route = N4sidOptions::ARoute::kStateRegression;
  const SsidResult fit = fit_from_moments(cm, 2, opt);
  EXPECT_EQ(fit.diagnostics.a_route, "state-regression");
  EXPECT_LT(eig_error(s.A, fit.params.A), 1e-6);
}

TEST_F(Ssid, CvaWeightingAgreesOnExactMoments) {
  std::mt19937_64 rng(23);
  const SystemParams s = oracle::random_stable(Dimensions{2, 3, 1}, rng);
  const ConvertedMoments cm = analytic_moments(s, Mat::Identity(1, 1), 3, 1.0);
  N4sidOptions opt;
  opt.weighting = N4sidOptions::Weighting::kCva;
  const SsidResult fit = fit_from_moments(cm, 2, opt);
  EXPECT_LT((gain(fit.params) - gain(s)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST_F(Ssid, RankOneSpectrum) {
  SystemParams s = SystemParams::zeros(Dimensions{1, 3, 1});
  s.A(0, 0) = 0.8;
  s.B(0, 0) = 0.5;
  s.C << 0.6, -0.4, 0.3;
  s.Q(0, 0) = 0.2;
  const ConvertedMoments cm = analytic_moments(s, Mat::Identity(1, 1), 3, 1.0);
  const auto sv = hankel_spectrum(cm.R, HankelConfig{3}, Dimensions{1, 3, 1});
  ASSERT_GE(sv.size(), 2u);
  EXPECT_LT(sv[1], 1e-6 * sv[0]);
}

TEST_F(Ssid, WhiteNoiseHasNoSpectralGap) {
  SystemParams s = SystemParams::zeros(Dimensions{1, 3, 1});
  s.C.setZero();
  s.D << 0.5, 0.2, -0.3;
  const ConvertedMoments cm = analytic_moments(s, Mat::Identity(1, 1), 3, 1.0);
  const auto sv = hankel_spectrum(cm.R, HankelConfig{3}, Dimensions{1, 3, 1});
  EXPECT_LT(sv[0], 1e-6);
  EXPECT_THROW(fit_from_moments(cm, 1, N4sidOptions{}), NumericalError);
}

TEST_F(Ssid, RejectsOrderAboveDepth) {
  const Preset pre = make_preset(PresetId::B, 1);
  const TimeSeries ts = simulate(pre.params, pre.inputs, 2000, 1);
  EXPECT_THROW(fit_bestlds(ts, HankelConfig{3}, 5), ConfigError);
}

TEST_F(Ssid, FitIsDeterministic) {
  const Preset pre = make_preset(PresetId::B, 1);
  const TimeSeries ts = simulate(pre.params, pre.inputs, 4000, 2);
  const SsidResult a = fit_bestlds(ts, HankelConfig{10}, 5);
  const SsidResult b = fit_bestlds(ts, HankelConfig{10}, 5);
  EXPECT_EQ(a.params.A, b.params.A);
  EXPECT_EQ(a.params.C, b.params.C);
  EXPECT_TRUE(a.diagnostics.scale_restored);
}

TEST_F(Ssid, PresetBErrorsShrinkWithData) {
  const Preset pre = make_preset(PresetId::B, 3);
  double small = 0.0, large = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    small += error_report(pre.params, fit_bestlds(simulate(pre.params, pre.inputs, 2000, seed), HankelConfig{10}, 5)
                                          .params)
                 .gain_error;
    large += error_report(pre.params,
                          fit_bestlds(simulate(pre.params, pre.inputs, 64000, seed), HankelConfig{10}, 5).params)
                 .gain_error;
  }
  EXPECT_LT(large, small);
}

TEST_F(Ssid, BestldsBeatsGaussianGain) {
  const Preset pre = make_preset(PresetId::B, 4);
  const TimeSeries ts = simulate(pre.params, pre.inputs, 40000, 4);
  const double best = error_report(pre.params, fit_bestlds(ts, HankelConfig{10}, 5).params).gain_error;
  const double gauss = error_report(pre.params, gauss_baseline(ts, HankelConfig{10}, 5).params).gain_error;
  EXPECT_LT(best, gauss);
}

}  // namespace
}  // namespace bestlds
