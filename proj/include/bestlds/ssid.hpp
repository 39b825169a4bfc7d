#pragma once

#include <string>
#include <vector>

#include "bestlds/moments.hpp"

namespace bestlds {

struct SsidDiagnostics {
  std::string weighting;
  std::string a_route;          ///< "shift-invariance" or "state-regression"
  double cond_future_inputs = 0.0;
  double cond_past_projection = 0.0;
  double state_residual_norm = 0.0;
  int elbow = 0;                ///< advisory only: index of the largest relative gap
  bool scale_restored = false;
  std::vector<double> probit_signal_fraction;  ///< r_i used by scale restoration
};

struct SsidResult {
  SystemParams params;
  std::vector<double> singular_values;  ///< descending, length kq
  int chosen_p = 0;
  SsidDiagnostics diagnostics;
  double seconds = 0.0;
};

struct N4sidOptions {
  /// Undo the unit-variance probit convention: the converted moments describe
  /// z + eps with eps ~ N(0, 1), so each output row is rescaled to put the
  /// latent part of z back on the probit scale.
  bool restore_probit_scale = false;

  enum class ARoute { kAuto, kShiftInvariance, kStateRegression };
  /// kAuto uses shift invariance when (k - 1) q >= p.
  ARoute a_route = ARoute::kAuto;

  /// Row weighting of the projection before the SVD. kCva scales by the
  /// inverse square root of the future-output covariance.
  enum class Weighting { kN4sid, kCva };
  Weighting weighting = Weighting::kN4sid;
};

/// R R^T = sigma (sigma assumed repaired).
Mat cholesky_R(const Mat& sigma);

/// Singular values of the weighted oblique projection; its rank reveals p.
std::vector<double> hankel_spectrum(const Mat& r, const HankelConfig& cfg, const Dimensions& dims,
                                    const N4sidOptions& options = {});

/// Covariance-form N4SID on R with rows ordered (u_p, u_f, z_p, z_f).
/// dims supplies q and m; p is the chosen order.
SsidResult n4sid(const Mat& r, const HankelConfig& cfg, const Dimensions& dims, int p,
                 const N4sidOptions& options = {});

/// N4SID on the raw binary outputs treated as real values.
SsidResult gauss_baseline(const TimeSeries& ts, const HankelConfig& cfg, int p);

/// Moments, probit conversion, Cholesky and N4SID with scale restoration.
SsidResult fit_bestlds(const TimeSeries& ts, const HankelConfig& cfg, int p);

/// Same pipeline from already converted moments.
SsidResult fit_from_moments(const ConvertedMoments& cm, int p, const N4sidOptions& options);

}  // namespace bestlds
