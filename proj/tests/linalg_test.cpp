#include <random>

#include <gtest/gtest.h>

#include "bestlds/errors.hpp"
#include "bestlds/linalg.hpp"
#include "support/oracles.hpp"

namespace bestlds {
namespace {

TEST(Linalg, PinvOfInvertibleIsInverse) {
  std::mt19937_64 rng(3);
  const Mat m = oracle::well_conditioned(4, rng);
  EXPECT_LT((linalg::pinv(m) - m.inverse()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Linalg, PinvSatisfiesPenroseConditions) {
  std::mt19937_64 rng(4);
  const Mat m = oracle::gaussian_matrix(6, 2, rng) * oracle::gaussian_matrix(2, 5, rng);  // rank 2
  const Mat p = linalg::pinv(m);
  EXPECT_LT((m * p * m - m).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((p * m * p - p).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(((m * p).transpose() - m * p).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Linalg, NearestPsdLeavesPsdAlone) {
  const Mat m = (Mat(2, 2) << 2, 1, 1, 2).finished();
  const auto r = linalg::nearest_psd(m, 1e-10);
  EXPECT_FALSE(r.repaired);
  EXPECT_NEAR(r.min_eigenvalue, 1.0, 1e-12);
  EXPECT_EQ(r.matrix, m);
}

TEST(Linalg, NearestPsdClipsNegativeEigenvalues) {
  const Mat m = (Mat(2, 2) << 1, 2, 2, 1).finished();  // eigenvalues 3, -1
  const auto r = linalg::nearest_psd(m, 1e-10);
  EXPECT_TRUE(r.repaired);
  EXPECT_NEAR(r.min_eigenvalue, -1.0, 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> eig(r.matrix);
  EXPECT_GE(eig.eigenvalues().minCoeff(), 1e-10 - 1e-15);
  EXPECT_NEAR(eig.eigenvalues().maxCoeff(), 3.0, 1e-12);
}

TEST(Linalg, CholeskyKnownCases) {
  EXPECT_EQ(linalg::lower_cholesky(Mat::Identity(3, 3)), Mat::Identity(3, 3));
  const Mat d = (Mat(2, 2) << 4, 0, 0, 1).finished();
  EXPECT_LT((linalg::lower_cholesky(d) - (Mat(2, 2) << 2, 0, 0, 1).finished()).norm(), 1e-15);
}

TEST(Linalg, CholeskyReconstructsSemidefinite) {
  std::mt19937_64 rng(5);
  const Mat g = oracle::gaussian_matrix(6, 3, rng);
  const Mat s = g * g.transpose();  // rank 3
  const Mat l = linalg::lower_cholesky(s);
  EXPECT_LT((l * l.transpose() - s).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE(l.isLowerTriangular());
}

TEST(Linalg, CholeskyRejectsIndefinite) {
  const Mat m = (Mat(2, 2) << 1, 2, 2, 1).finished();
  EXPECT_THROW(linalg::lower_cholesky(m), NumericalError);
}

TEST(Linalg, LyapunovKnownSolutions) {
  EXPECT_LT((linalg::solve_discrete_lyapunov(Mat::Zero(2, 2), Mat::Identity(2, 2)) - Mat::Identity(2, 2)).norm(),
            1e-15);
  const Mat p = linalg::solve_discrete_lyapunov(0.5 * Mat::Identity(2, 2), Mat::Identity(2, 2));
  EXPECT_LT((p - (4.0 / 3.0) * Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Linalg, LyapunovResidualOnRandomStable) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    const auto s = oracle::random_stable(Dimensions{4, 1, 1}, rng);
    const Mat p = linalg::solve_discrete_lyapunov(s.A, s.Q);
    EXPECT_LT((p - s.A * p * s.A.transpose() - s.Q).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((p - oracle::stationary_cov_series(s.A, s.Q)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Linalg, LyapunovRejectsUnstable) {
  EXPECT_THROW(linalg::solve_discrete_lyapunov(Mat::Identity(2, 2), Mat::Identity(2, 2)), StabilityError);
}

TEST(Linalg, PrincipalAngleGeometry) {
  const Mat e1 = (Mat(2, 1) << 1, 0).finished();
  const Mat e2 = (Mat(2, 1) << 0, 1).finished();
  const Mat diag = (Mat(2, 1) << 1, 1).finished();
  EXPECT_NEAR(linalg::largest_principal_angle(e1, e2), M_PI / 2, 1e-12);
  EXPECT_NEAR(linalg::largest_principal_angle(e1, diag), M_PI / 4, 1e-12);
  EXPECT_NEAR(linalg::largest_principal_angle(e1, 3.0 * e1), 0.0, 1e-12);
}

TEST(Linalg, SpectralRadius) {
  EXPECT_NEAR(linalg::spectral_radius((Mat(2, 2) << 0, -0.5, 0.5, 0).finished()), 0.5, 1e-14);
  EXPECT_NEAR(linalg::spectral_radius((Mat(2, 2) << 0.9, 0, 0, -0.95).finished()), 0.95, 1e-14);
}

}  // namespace
}  // namespace bestlds
