#include "bestlds/metrics.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "bestlds/errors.hpp"
#include "bestlds/laplace_em.hpp"
#include "bestlds/normal.hpp"

namespace bestlds {

Mat gain(const SystemParams& params) {
  const Eigen::Index p = params.A.rows();
  const Mat lhs = Mat::Identity(p, p) - params.A;
  Eigen::FullPivLU<Mat> lu(lhs);
  if (!lu.isInvertible() || lu.rcond() < 1e-13) {
    throw NumericalError("gain: I - A is singular (A has an eigenvalue at 1)");
  }
  return params.C * lu.solve(params.B) + params.D;
}

std::vector<int> hungarian(const Mat& cost) {
  // Shortest augmenting path formulation with row/column potentials.
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ParameterError("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

double eig_error(const Mat& a, const Mat& a_hat) {
  if (a.rows() != a_hat.rows()) throw ParameterError("eig_error: dimension mismatch");
  const Eigen::Index p = a.rows();
  if (p == 0) return 0.0;
  const Eigen::VectorXcd la = Eigen::EigenSolver<Mat>(a, false).eigenvalues();
  const Eigen::VectorXcd lb = Eigen::EigenSolver<Mat>(a_hat, false).eigenvalues();
  Mat cost(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) cost(i, j) = std::abs(la(i) - lb(j));
  }
  const auto assignment = hungarian(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) total += cost(i, assignment[i]);
  return total / static_cast<double>(p);
}

std::optional<double> subspace_angle(const Mat& c, const Mat& c_hat) {
  if (c.rows() != c_hat.rows() || c.cols() != c_hat.cols()) throw ParameterError("subspace_angle: shape mismatch");
  if (c.rows() < c.cols()) return std::nullopt;
  return linalg::largest_principal_angle(c, c_hat);
}

ErrorReport error_report(const SystemParams& truth, const SystemParams& est) {
  if (!(truth.dims() == est.dims())) throw ParameterError("error_report: dimension mismatch");
  ErrorReport r;
  r.eig_error_A = eig_error(truth.A, est.A);
  r.subspace_angle_C = subspace_angle(truth.C, est.C);
  r.elem_error_D = truth.D.size() > 0 ? (truth.D - est.D).cwiseAbs().mean() : 0.0;
  const Mat g_true = gain(truth);
  const Mat g_est = gain(est);
  r.gain_error = g_true.size() > 0 ? (g_true - g_est).cwiseAbs().mean() : 0.0;
  return r;
}

Mat impulse_response(const SystemParams& params, int input_dim, int horizon) {
  const int m = static_cast<int>(params.B.cols());
  if (input_dim < 0 || input_dim >= m) {
    std::ostringstream msg;
    msg << "impulse_response: input dimension " << input_dim << " is outside [0, " << m << ")";
    throw ConfigError(msg.str());
  }
  if (horizon < 1) throw ConfigError("impulse_response: horizon must be >= 1");
  Mat u = Mat::Zero(horizon, m);
  u(0, input_dim) = 1.0;
  SystemParams rest = params;
  rest.mu0 = Vec::Zero(params.A.rows());
  return simulate_noiseless(rest, u).z.transpose();
}

ChoicePrediction predict_choices(const SystemParams& params, const TimeSeries& ts, const PredictOptions& options) {
  params.validate();
  if (ts.q() != params.C.rows() || ts.m() != params.B.cols()) {
    throw ParameterError("predict_choices: parameter and data dimensions disagree");
  }
  const Eigen::Index n = ts.length();
  const int q = ts.q();
  ChoicePrediction out;
  out.predicted.resize(n, q);
  out.probability.resize(n, q);
  Eigen::Index hits = 0;

  for (const auto& [begin, end] : ts.segments()) {
    Vec mean = params.mu0;
    Mat cov = params.Q0;
    for (Eigen::Index t = begin; t < end; ++t) {
      const Vec ut = ts.u.row(t).transpose();
      const Vec drive = params.D * ut;
      const Vec z = params.C * mean + drive;
      for (int i = 0; i < q; ++i) {
        const double var = params.C.row(i) * cov * params.C.row(i).transpose();
        out.predicted(t, i) = z(i) >= 0.0 ? 1.0 : 0.0;
        out.probability(t, i) = normal::cdf(z(i) / std::sqrt(1.0 + var));
        hits += out.predicted(t, i) == ts.y(t, i) ? 1 : 0;
      }
      if (!options.open_loop) {
        for (int i = 0; i < q; ++i) {
          const Vec pc = cov * params.C.row(i).transpose();
          const double v = params.C.row(i).dot(pc) + 1.0;
          const double sv = std::sqrt(v);
          const double s = ts.y(t, i) > 0.5 ? 1.0 : -1.0;
          const double a = params.C.row(i).dot(mean) + drive(i);
          const double kappa = s * a / sv;
          const double lambda = normal::inv_mills(kappa);
          mean += pc * (s * lambda / sv);
          cov -= pc * pc.transpose() * (lambda * (lambda + kappa) / v);
          cov = linalg::symmetrize(cov);
        }
      }
      mean = params.A * mean + params.B * ut;
      cov = linalg::symmetrize(params.A * cov * params.A.transpose() + params.Q);
    }
  }
  out.accuracy = n * q > 0 ? static_cast<double>(hits) / static_cast<double>(n * q) : 0.0;
  return out;
}

double log_evidence(const SystemParams& params, const TimeSeries& ts) {
  // A tight mode keeps the value reproducible across equivalent parameterizations.
  return e_step(params, ts, NewtonConfig{.max_steps = 100, .grad_tol = 1e-9}).elbo_bits;
}

}  // namespace bestlds
