#pragma once

#include <Eigen/Dense>

namespace bestlds {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace linalg {

/// Relative singular-value cutoff shared by every pseudo-inverse in the
/// identification path.
inline constexpr double kPinvRelTol = 1e-10;

/// SVD pseudo-inverse; singular values below rel_tol * max are dropped.
Mat pinv(const Mat& m, double rel_tol = kPinvRelTol);

/// Minimum-norm least-squares solution X of lhs * X = rhs via pinv(lhs).
Mat lstsq(const Mat& lhs, const Mat& rhs, double rel_tol = kPinvRelTol);

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

struct PsdRepair {
  Mat matrix;
  double min_eigenvalue = 0.0;  ///< before repair
  bool repaired = false;
};

/// Symmetrize, then clip eigenvalues below `floor`. Leaves the matrix
/// untouched (apart from symmetrization) when it already clears the floor.
PsdRepair nearest_psd(const Mat& m, double floor);

/// Lower Cholesky factor L with L L^T = m. Pivots below rel_tol * max(diag)
/// are treated as exact zeros (semidefinite input); clearly negative pivots
/// throw NumericalError.
Mat lower_cholesky(const Mat& m, double rel_tol = 1e-12);

double spectral_radius(const Mat& a);

/// Solves P = A P A^T + Q by the doubling iteration. Throws StabilityError
/// when the spectral radius of A is >= 1 or the iteration fails to settle.
Mat solve_discrete_lyapunov(const Mat& a, const Mat& q);

/// Largest principal angle (radians) between the column spaces of x and y.
double largest_principal_angle(const Mat& x, const Mat& y);

}  // namespace linalg
}  // namespace bestlds
