#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bestlds/errors.hpp"
#include "bestlds/laplace_em.hpp"
#include "bestlds/log.hpp"
#include "bestlds/metrics.hpp"
#include "bestlds/ssid.hpp"
#include "support/oracles.hpp"

namespace bestlds {
namespace {

class LaplaceEm : public ::testing::Test {
 protected:
  void SetUp() override { previous_ = set_warning_sink({}); }
  void TearDown() override { set_warning_sink(previous_); }
  WarningSink previous_;
};

SystemParams small_system(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return oracle::random_stable(Dimensions{2, 3, 1}, rng);
}

TimeSeries sample(const SystemParams& s, Eigen::Index n, std::uint64_t seed, int trials = 1) {
  return simulate(s, InputSpec::gaussian(Vec::Zero(s.dims().m), Mat::Identity(s.dims().m, s.dims().m)), n, seed,
                  trials);
}

TEST_F(LaplaceEm, UninformativeOutputsLeaveThePrior) {
  SystemParams s = small_system(1);
  s.C.setZero();
  s.D.setZero();
  s.mu0 << 0.3, -0.2;
  const TimeSeries ts = sample(s, 12, 2);
  const PosteriorApprox post = e_step(s, ts);

  Vec mean = s.mu0;
  Mat cov = s.Q0;
  for (Eigen::Index t = 0; t < 12; ++t) {
    EXPECT_LT((post.mode.row(t).transpose() - mean).cwiseAbs().maxCoeff(), 1e-9) << t;
    EXPECT_LT((post.cov[t] - cov).cwiseAbs().maxCoeff(), 1e-9) << t;
    if (t + 1 < 12) EXPECT_LT((post.cross[t] - cov * s.A.transpose()).cwiseAbs().maxCoeff(), 1e-9) << t;
    mean = s.A * mean + s.B * ts.u.row(t).transpose();
    cov = s.A * cov * s.A.transpose() + s.Q;
  }
  // the Gaussian part integrates exactly, leaving 3 fair coins per step
  EXPECT_NEAR(post.elbo_bits, -3.0, 1e-9);
}

TEST_F(LaplaceEm, ModeHasVanishingGradient) {
  const SystemParams s = small_system(3);
  const TimeSeries ts = sample(s, 80, 4);
  const PosteriorApprox post = e_step(s, ts, NewtonConfig{100, 1e-8});
  Mat grad;
  log_joint(s, ts, post.mode, &grad);
  EXPECT_LT(grad.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(log_joint(s, ts, post.mode), post.log_joint, 1e-10);
}

TEST_F(LaplaceEm, LogJointGradientMatchesFiniteDifferences) {
  const SystemParams s = small_system(5);
  const TimeSeries ts = sample(s, 10, 6, 2);
  std::mt19937_64 rng(7);
  const Mat x = oracle::gaussian_matrix(10, 2, rng);
  Mat grad;
  log_joint(s, ts, x, &grad);
  const double h = 1e-6;
  for (Eigen::Index t = 0; t < 10; ++t) {
    for (int j = 0; j < 2; ++j) {
      Mat xp = x, xm = x;
      xp(t, j) += h;
      xm(t, j) -= h;
      const double fd = (log_joint(s, ts, xp) - log_joint(s, ts, xm)) / (2 * h);
      EXPECT_NEAR(grad(t, j), fd, 1e-6 * std::max(1.0, std::abs(fd))) << t << "," << j;
    }
  }
}

TEST_F(LaplaceEm, SingleStepLaplaceMatchesDirectComputation) {
  SystemParams s = SystemParams::zeros(Dimensions{1, 1, 1});
  s.C(0, 0) = 1.3;
  s.D(0, 0) = 0.4;
  s.mu0(0) = 0.2;
  s.Q0(0, 0) = 0.8;
  TimeSeries ts;
  ts.u = Mat::Constant(1, 1, 0.5);
  ts.y = Mat::Zero(1, 1);

  auto log_post = [&](double x) {
    const double prior = -0.5 * (x - 0.2) * (x - 0.2) / 0.8 - 0.5 * std::log(2 * M_PI * 0.8);
    return prior + std::log(oracle::phi_cdf(-(1.3 * x + 0.2)));
  };
  // golden-section search for the mode
  double lo = -5.0, hi = 5.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 200; ++i) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    (log_post(a) > log_post(b) ? hi : lo) = log_post(a) > log_post(b) ? b : a;
  }
  const double mode = 0.5 * (lo + hi);
  const double h = 1e-4;
  const double curv = -(log_post(mode + h) - 2 * log_post(mode) + log_post(mode - h)) / (h * h);
  const double laplace = log_post(mode) + 0.5 * std::log(2 * M_PI / curv);

  const PosteriorApprox post = e_step(s, ts, NewtonConfig{100, 1e-12});
  EXPECT_NEAR(post.mode(0, 0), mode, 1e-6);
  EXPECT_NEAR(post.cov[0](0, 0), 1.0 / curv, 1e-5);
  EXPECT_NEAR(post.log_evidence, laplace, 1e-6);
}

TEST_F(LaplaceEm, TrialBoundariesDecoupleTheChain) {
  const SystemParams s = small_system(8);
  const TimeSeries ts = sample(s, 40, 9, 2);
  const PosteriorApprox post = e_step(s, ts);
  EXPECT_EQ(post.lower[19].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(post.cross[19].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(post.lower[18].cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(LaplaceEm, MStepIsLeastSquaresForAPointPosterior) {
  const SystemParams s = small_system(10);
  const TimeSeries ts = sample(s, 400, 11);
  PosteriorApprox post;
  post.mode = *ts.x;
  post.cov.assign(400, Mat::Zero(2, 2));
  post.cross.assign(399, Mat::Zero(2, 2));

  Mat phi(399, 3);
  phi << ts.x->topRows(399), ts.u.topRows(399);
  const Mat target = ts.x->bottomRows(399);
  const Mat ab = phi.colPivHouseholderQr().solve(target).transpose();
  const Mat resid = target - phi * ab.transpose();

  const SystemParams next = m_step(s, post, ts);
  EXPECT_LT((next.A - ab.leftCols(2)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((next.B - ab.rightCols(1)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((next.Q - resid.transpose() * resid / 399.0).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((next.mu0 - ts.x->row(0).transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(LaplaceEm, MStepImprovesTheSurrogate) {
  for (std::uint64_t seed : {12u, 13u, 14u}) {
    const SystemParams truth = small_system(seed);
    const TimeSeries ts = sample(truth, 300, seed);
    const SystemParams init = sanitize_for_em(random_init(truth.dims(), seed), 1e-6);
    const PosteriorApprox post = e_step(init, ts);
    const SystemParams next = m_step(init, post, ts);
    EXPECT_GE(expected_complete_loglik(next, post, ts), expected_complete_loglik(init, post, ts) - 1e-9) << seed;
  }
}

TEST_F(LaplaceEm, StationaryAtTheMStepFixedPoint) {
  const SystemParams truth = small_system(15);
  const TimeSeries ts = sample(truth, 300, 16);
  const SystemParams init = sanitize_for_em(random_init(truth.dims(), 2), 1e-6);
  const PosteriorApprox post = e_step(init, ts);
  const SystemParams once = m_step(init, post, ts);
  const SystemParams twice = m_step(once, post, ts);
  // closed-form blocks do not depend on the previous parameters
  EXPECT_LT((once.A - twice.A).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((once.Q - twice.Q).cwiseAbs().maxCoeff(), 1e-12);
  // the emission block is already near its optimum
  EXPECT_LT((once.C - twice.C).cwiseAbs().maxCoeff(), 1e-4);
}

TEST_F(LaplaceEm, ConvergesQuicklyFromTheTruth) {
  const Preset pre = make_preset(PresetId::B, 2);
  const TimeSeries ts = simulate(pre.params, pre.inputs, 3000, 17);
  const EMTrace trace = run_em(pre.params, ts, EMConfig{.max_iters = 10});
  EXPECT_TRUE(trace.converged);
  EXPECT_LE(trace.converged_iter, 3);
  EXPECT_EQ(trace.mode, ConvMode::kGainDelta);
}

TEST_F(LaplaceEm, ElboRisesFromARandomStart) {
  const SystemParams truth = small_system(18);
  const TimeSeries ts = sample(truth, 500, 19);
  EMConfig cfg;
  cfg.max_iters = 15;
  cfg.stop_at_convergence = false;
  const EMTrace trace = run_em(random_init(truth.dims(), 20), ts, cfg);
  ASSERT_EQ(trace.iterations.size(), 15u);
  EXPECT_EQ(trace.flagged_decreases, 0);
  EXPECT_GT(trace.iterations.back().elbo_bits, trace.iterations.front().elbo_bits);
  for (std::size_t i = 1; i < trace.iterations.size(); ++i) {
    EXPECT_GE(trace.iterations[i].seconds, trace.iterations[i - 1].seconds);
  }
}

TEST_F(LaplaceEm, RunIsDeterministic) {
  const SystemParams truth = small_system(21);
  const TimeSeries ts = sample(truth, 200, 22);
  const SystemParams init = random_init(truth.dims(), 23);
  const EMConfig cfg{.max_iters = 4};
  const EMTrace a = run_em(init, ts, cfg), b = run_em(init, ts, cfg);
  EXPECT_EQ(a.params.A, b.params.A);
  EXPECT_EQ(a.params.C, b.params.C);
  EXPECT_EQ(a.iterations.back().elbo_bits, b.iterations.back().elbo_bits);
}

TEST_F(LaplaceEm, RandomInitIsStableAndSeeded) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const SystemParams s = random_init(Dimensions{4, 3, 2}, seed);
    const double r = linalg::spectral_radius(s.A);
    EXPECT_GE(r, 0.5 - 1e-12);
    EXPECT_LE(r, 0.95 + 1e-12);
    EXPECT_NO_THROW(s.validate());
  }
  EXPECT_EQ(random_init(Dimensions{3, 2, 1}, 4).A, random_init(Dimensions{3, 2, 1}, 4).A);
  EXPECT_NE(random_init(Dimensions{3, 2, 1}, 4).A, random_init(Dimensions{3, 2, 1}, 5).A);
}

TEST_F(LaplaceEm, SpectralInitializersMatchTheirFits) {
  const Preset pre = make_preset(PresetId::B, 3);
  const TimeSeries ts = simulate(pre.params, pre.inputs, 4000, 24);
  const HankelConfig cfg{10};
  EXPECT_EQ(gaussian_init(ts, cfg, 5).A, gauss_baseline(ts, cfg, 5).params.A);
  EXPECT_EQ(bestlds_init(ts, cfg, 5).C, fit_bestlds(ts, cfg, 5).params.C);
}

TEST_F(LaplaceEm, SanitizePullsUnstableDynamicsInside) {
  SystemParams s = SystemParams::zeros(Dimensions{2, 1, 0});
  s.A = 1.2 * Mat::Identity(2, 2);
  s.Q.setZero();
  const SystemParams t = sanitize_for_em(s, 1e-6);
  EXPECT_NEAR(linalg::spectral_radius(t.A), 0.99, 1e-12);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mat>(t.Q).eigenvalues().minCoeff(), 1e-6 - 1e-15);
}

TEST_F(LaplaceEm, ConfigValidation) {
  EXPECT_THROW(EMConfig{.max_iters = 0}.validate(), ConfigError);
  EXPECT_THROW(EMConfig{.gain_tol = -1.0}.validate(), ConfigError);
  EMConfig cfg;
  cfg.quadrature_nodes = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace bestlds
