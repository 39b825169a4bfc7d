#pragma once

#include <optional>
#include <vector>

#include "bestlds/model.hpp"

namespace bestlds {

struct ErrorReport {
  double eig_error_A = 0.0;
  std::optional<double> subspace_angle_C;  ///< absent when q < p
  double elem_error_D = 0.0;
  double gain_error = 0.0;
};

/// G = C (I - A)^{-1} B + D. Throws NumericalError when I - A is singular.
Mat gain(const SystemParams& params);

/// Mean |lambda_i - lambda_hat_pi(i)| under the optimal matching pi.
double eig_error(const Mat& a, const Mat& a_hat);

/// Minimum-cost perfect matching; returns column assigned to each row.
std::vector<int> hungarian(const Mat& cost);

/// Largest principal angle between col(C) and col(C_hat); nullopt when q < p.
std::optional<double> subspace_angle(const Mat& c, const Mat& c_hat);

ErrorReport error_report(const SystemParams& truth, const SystemParams& est);

/// q x horizon noiseless response to a unit input on input_dim at step 0.
Mat impulse_response(const SystemParams& params, int input_dim, int horizon);

struct PredictOptions {
  bool open_loop = false;  ///< skip the measurement update
};

struct ChoicePrediction {
  Mat predicted;    ///< N x q, 1{C x_{t|t-1} + D u_t >= 0}
  Mat probability;  ///< N x q predictive P(y = 1)
  double accuracy = 0.0;
};

/// One-step-ahead prediction with an assumed-density probit filter. Each
/// trial segment restarts from (mu0, Q0).
ChoicePrediction predict_choices(const SystemParams& params, const TimeSeries& ts, const PredictOptions& options = {});

/// Laplace log-evidence of y given u, in bits per time step.
double log_evidence(const SystemParams& params, const TimeSeries& ts);

}  // namespace bestlds
