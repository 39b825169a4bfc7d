#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bestlds/linalg.hpp"

namespace bestlds {

struct Dimensions {
  int p = 1;  ///< latent
  int q = 1;  ///< observed binary channels
  int m = 0;  ///< inputs

  void validate() const;
  friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

/// Probit-Bernoulli LDS, indexed so that the input at step t reaches the
/// output immediately through D and the state one step later through B:
///
///   x_0 ~ N(mu0, Q0),  x_{t+1} = A x_t + B u_t + w_t,  w_t ~ N(0, Q)
///   z_t = C x_t + D u_t,  y_t ~ Bernoulli(Phi(z_t))
struct SystemParams {
  Mat A, B, C, D, Q;
  Vec mu0;
  Mat Q0;

  Dimensions dims() const;

  /// Shapes, symmetry and PSD checks. Throws ParameterError.
  void validate() const;

  /// Zero-initialised parameters of the given shape (Q = Q0 = I).
  static SystemParams zeros(const Dimensions& dims);
};

/// I.i.d. per-step input distribution.
struct InputSpec {
  enum class Kind { kGaussian, kStudentT };

  Kind kind = Kind::kGaussian;
  Vec mean;
  Mat scale;  ///< covariance for Gaussian, scale matrix for Student-t
  double dof = 0.0;

  static InputSpec gaussian(Vec mean, Mat cov);
  static InputSpec student_t(double dof, Mat scale);

  int dim() const { return static_cast<int>(mean.size()); }
  /// Second central moment. Student-t requires dof > 2.
  Mat covariance() const;
  void validate() const;
};

/// Inputs u (N x m), binary outputs y (N x q) and optional diagnostics.
struct TimeSeries {
  Mat u;
  Mat y;
  std::optional<Mat> x;  ///< latents, N x p
  std::optional<Mat> z;  ///< C x + D u, N x q
  /// Start index of every trial segment; empty means one segment.
  std::vector<Eigen::Index> trial_bounds;

  Eigen::Index length() const { return y.rows(); }
  int q() const { return static_cast<int>(y.cols()); }
  int m() const { return static_cast<int>(u.cols()); }

  /// Half-open [begin, end) ranges of each trial segment.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> segments() const;

  /// Copy holding only the listed segments, re-based to start at 0.
  TimeSeries select_segments(const std::vector<int>& which) const;

  void validate() const;
};

enum class PresetId { A, B, C, D, E, F, G };

PresetId parse_preset(const std::string& name);
std::string preset_name(PresetId id);

struct PresetOptions {
  /// Rescale emission rows so every z_i has unit stationary variance.
  /// Only honoured by presets with stable (radius < 1) dynamics.
  bool normalize_emissions = true;
  /// Multiplies the rotation presets (D, E, G) by this radius. Values below
  /// 1 give a stable variant with a stationary law.
  double rotation_radius = 1.0;
};

struct Preset {
  SystemParams params;
  InputSpec inputs;
};

Preset make_preset(PresetId id, std::uint64_t seed, const PresetOptions& options = {});

/// P with P = A P A^T + Q.
Mat stationary_latent_cov(const Mat& a, const Mat& q);

/// Stationary covariance of z_t under i.i.d. inputs with covariance input_cov.
Mat stationary_output_cov(const SystemParams& params, const Mat& input_cov);

/// Rescales rows of (C, D) so that diag of stationary_output_cov is 1.
/// The binary process is unchanged by positive row scaling of z.
SystemParams normalize_emissions(const SystemParams& params, const Mat& input_cov);

Mat rotation_matrix(double theta);

/// Samples the model. With n_trials > 1 the N steps are split into equal
/// trials, each starting from a fresh x_0 draw.
TimeSeries simulate(const SystemParams& params, const InputSpec& inputs, Eigen::Index n,
                    std::uint64_t seed, int n_trials = 1);

struct NoiselessTrace {
  Mat x;  ///< N x p
  Mat z;  ///< N x q
  Mat y;  ///< 1{z >= 0}
};

/// Deterministic run from x_0 = mu0 with Q and the Bernoulli draw disabled.
NoiselessTrace simulate_noiseless(const SystemParams& params, const Mat& u);

}  // namespace bestlds
