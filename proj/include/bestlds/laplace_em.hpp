#pragma once

#include <cstdint>
#include <vector>

#include "bestlds/moments.hpp"

namespace bestlds {

struct NewtonConfig {
  int max_steps = 100;
  double grad_tol = 1e-6;  ///< max-abs gradient of the log joint at the mode
};

enum class ConvMode { kAuto, kGainDelta, kEvidenceDelta };

struct EMConfig {
  int max_iters = 100;
  ConvMode conv_mode = ConvMode::kAuto;  ///< auto: gain when q >= p, else evidence
  double gain_tol = 0.15;
  double evidence_tol_bits = 0.01;
  NewtonConfig newton;
  std::uint64_t seed = 0;
  /// When false the loop runs to max_iters and only records the first
  /// converged iteration.
  bool stop_at_convergence = true;
  double variance_floor = 1e-6;
  int emission_newton_steps = 5;
  int quadrature_nodes = 12;

  void validate() const;
};

/// Laplace approximation of p(x_{0:N-1} | y, u).
struct PosteriorApprox {
  Mat mode;                   ///< N x p
  std::vector<Mat> diag;      ///< Hessian blocks of -log p(x, y)
  std::vector<Mat> lower;     ///< lower[t] = H_{t+1, t}; zero across trials
  std::vector<Mat> cov;       ///< marginal covariances
  std::vector<Mat> cross;     ///< cross[t] = Cov(x_t, x_{t+1})
  double log_joint = 0.0;     ///< log p(mode, y)
  double log_evidence = 0.0;  ///< nats
  double elbo_bits = 0.0;     ///< log_evidence / (N ln 2)
  double grad_norm = 0.0;     ///< max-abs gradient at the mode
  int newton_steps = 0;
};

/// Newton's method on the block-tridiagonal log posterior. warm_start (N x p)
/// is used as the initial trajectory when its shape matches.
PosteriorApprox e_step(const SystemParams& params, const TimeSeries& ts, const NewtonConfig& newton = {},
                       const Mat* warm_start = nullptr);

/// log p(x, y) and its gradient with respect to the trajectory.
double log_joint(const SystemParams& params, const TimeSeries& ts, const Mat& x, Mat* grad = nullptr);

/// E_q[log p(x, y)] under the Gaussian posterior q.
double expected_complete_loglik(const SystemParams& params, const PosteriorApprox& post, const TimeSeries& ts,
                                int quadrature_nodes = 12);

/// Closed-form A, B, Q, mu0, Q0; Newton ascent for the rows of (C, D).
SystemParams m_step(const SystemParams& params, const PosteriorApprox& post, const TimeSeries& ts,
                    const EMConfig& cfg = {});

struct EMIteration {
  int iter = 0;
  double elbo_bits = 0.0;   ///< evidence of the parameters entering this iteration
  double gain_delta = 0.0;  ///< mean |G_new - G_old| after this M-step
  double seconds = 0.0;     ///< cumulative EM time
};

struct EMTrace {
  std::vector<EMIteration> iterations;
  SystemParams params;
  bool converged = false;
  int iters = 0;
  int converged_iter = 0;  ///< first iteration meeting the criterion; 0 if none
  ConvMode mode = ConvMode::kGainDelta;
  int flagged_decreases = 0;  ///< ELBO drops larger than 0.01 bits/sample
  double init_seconds = 0.0;  ///< filled by callers that time the initializer
  double em_seconds = 0.0;
};

EMTrace run_em(const SystemParams& init, const TimeSeries& ts, const EMConfig& cfg = {});

/// Stable A with radius uniform in [0.5, 0.95], small B/C/D, Q = 0.1 I.
SystemParams random_init(const Dimensions& dims, std::uint64_t seed);
SystemParams gaussian_init(const TimeSeries& ts, const HankelConfig& cfg, int p);
SystemParams bestlds_init(const TimeSeries& ts, const HankelConfig& cfg, int p);

/// Floors Q and Q0, pulls an unstable A inside radius 0.99 and fills in a
/// missing Q0. Applied by run_em to every initializer.
SystemParams sanitize_for_em(SystemParams params, double variance_floor);

}  // namespace bestlds
