#include "bestlds/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bestlds/errors.hpp"

namespace bestlds::linalg {

Mat pinv(const Mat& m, double rel_tol) {
  if (m.size() == 0) return Mat::Zero(m.cols(), m.rows());
  Eigen::BDCSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double cutoff = rel_tol * (s.size() > 0 ? s(0) : 0.0);
  Vec inv = Vec::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Mat lstsq(const Mat& lhs, const Mat& rhs, double rel_tol) { return pinv(lhs, rel_tol) * rhs; }

PsdRepair nearest_psd(const Mat& m, double floor) {
  PsdRepair out;
  out.matrix = symmetrize(m);
  if (out.matrix.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Mat> eig(out.matrix);
  const Vec& values = eig.eigenvalues();
  out.min_eigenvalue = values.minCoeff();
  if (out.min_eigenvalue >= floor) return out;
  const Vec clipped = values.cwiseMax(floor);
  out.matrix = symmetrize(eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose());
  out.repaired = true;
  return out;
}

Mat lower_cholesky(const Mat& m, double rel_tol) {
  const Eigen::Index n = m.rows();
  if (m.cols() != n) throw NumericalError("cholesky: matrix is not square");
  Mat l = Mat::Zero(n, n);
  const double scale = n > 0 ? m.diagonal().cwiseAbs().maxCoeff() : 0.0;
  const double tol = rel_tol * scale;
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (d < -std::max(tol, 1e-14) * 1e3) {
      std::ostringstream msg;
      msg << "cholesky: matrix is indefinite (pivot " << j << " = " << d << ")";
      throw NumericalError(msg.str());
    }
    if (d <= tol) continue;  // semidefinite direction: column stays zero
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

double spectral_radius(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> eig(a, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Mat solve_discrete_lyapunov(const Mat& a, const Mat& q) {
  const double radius = spectral_radius(a);
  if (!(radius < 1.0 - 1e-12)) {
    std::ostringstream msg;
    msg << "lyapunov: spectral radius " << radius << " is not < 1";
    throw StabilityError(msg.str());
  }
  Mat p = symmetrize(q);
  Mat ak = a;
  for (int iter = 0; iter < 200; ++iter) {
    const Mat next = p + ak * p * ak.transpose();
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    ak = ak * ak;
    if (change <= 1e-15 * std::max(1.0, p.cwiseAbs().maxCoeff()) || ak.cwiseAbs().maxCoeff() < 1e-300) {
      return symmetrize(p);
    }
  }
  throw StabilityError("lyapunov: doubling iteration did not converge");
}

double largest_principal_angle(const Mat& x, const Mat& y) {
  const Mat qx = Eigen::HouseholderQR<Mat>(x).householderQ() * Mat::Identity(x.rows(), x.cols());
  const Mat qy = Eigen::HouseholderQR<Mat>(y).householderQ() * Mat::Identity(y.rows(), y.cols());
  // sine of the largest angle = spectral norm of the part of qy outside span(qx)
  const Mat residual = qy - qx * (qx.transpose() * qy);
  Eigen::JacobiSVD<Mat> svd(residual);
  const double s = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  return std::asin(std::clamp(s, 0.0, 1.0));
}

}  // namespace bestlds::linalg
