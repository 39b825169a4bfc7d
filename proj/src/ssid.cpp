#include "bestlds/ssid.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "bestlds/errors.hpp"
#include "bestlds/log.hpp"

namespace bestlds {
namespace {

using Index = Eigen::Index;

// Row layout of R: U_p, U_f, Z_p, Z_f.
struct Layout {
  Index k, q, m;
  Index mi() const { return k * m; }
  Index li() const { return k * q; }
  Index uf() const { return mi(); }
  Index zp() const { return 2 * mi(); }
  Index zf() const { return 2 * mi() + li(); }
  Index total() const { return 2 * (mi() + li()); }
};

double condition_number(const Mat& m) {
  if (m.size() == 0) return 1.0;
  Eigen::BDCSVD<Mat> svd(m);
  const Vec& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

// Removes from the first 2mi columns their component in the row space of Ru.
Mat perp_inputs(const Mat& x, const Mat& ru) {
  Mat out = x;
  if (ru.size() == 0) return out;
  const Index cols = ru.cols();
  out.leftCols(cols) -= x.leftCols(cols) * linalg::pinv(ru) * ru;
  return out;
}

struct Projection {
  Mat weighted;
  Mat left;  // lower-triangular row weight W; empty for unit weights
  double cond_ru = 1.0;
  double cond_rpp = 1.0;
};

Projection oblique_projection(const Mat& r, const Layout& lay, N4sidOptions::Weighting weighting) {
  if (r.rows() != lay.total() || r.cols() != lay.total()) {
    std::ostringstream msg;
    msg << "R is " << r.rows() << "x" << r.cols() << "; expected " << lay.total() << " square";
    throw ParameterError(msg.str());
  }
  const Mat rf = r.middleRows(lay.zf(), lay.li());
  Mat rp(lay.mi() + lay.li(), lay.total());
  rp << r.topRows(lay.mi()), r.middleRows(lay.zp(), lay.li());
  const Mat ru = r.block(lay.uf(), 0, lay.mi(), 2 * lay.mi());

  Projection out;
  const Mat rfp = perp_inputs(rf, ru);
  const Mat rpp = perp_inputs(rp, ru);
  const Mat ob = rfp * linalg::pinv(rpp) * rp;
  out.weighted = perp_inputs(ob, ru);
  if (weighting == N4sidOptions::Weighting::kCva) {
    out.left = linalg::lower_cholesky(rfp * rfp.transpose());
    out.weighted = linalg::pinv(out.left) * out.weighted;
  }
  out.cond_ru = condition_number(ru);
  out.cond_rpp = condition_number(rpp);
  return out;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

struct Regression {
  Mat lhs, rhs;
};

// Stacked [x_{t+1}; z_t] against [x_t; u_f] with states taken from gam.
Regression state_regression(const Mat& r, const Layout& lay, const Mat& gam, Index n) {
  const Index l = lay.q;
  const Mat gam_inv = linalg::pinv(gam);
  const Mat gamm_inv = linalg::pinv(gam.topRows(lay.li() - l));
  const Index cols_r = lay.zf();
  const Index cols_l = lay.zf() + l;

  Regression reg;
  reg.rhs = Mat::Zero(n + lay.mi(), cols_l);
  reg.rhs.topLeftCorner(n, cols_r) = gam_inv * r.block(lay.zf(), 0, lay.li(), cols_r);
  reg.rhs.bottomRows(lay.mi()) = r.block(lay.uf(), 0, lay.mi(), cols_l);

  reg.lhs = Mat::Zero(n + l, cols_l);
  reg.lhs.topRows(n) = gamm_inv * r.block(lay.zf() + l, 0, lay.li() - l, cols_l);
  reg.lhs.bottomRows(l) = r.block(lay.zf(), 0, l, cols_l);
  return reg;
}

Mat observability(const Mat& a, const Mat& c, Index k) {
  Mat gam(k * c.rows(), a.rows());
  Mat block = c;
  for (Index i = 0; i < k; ++i) {
    gam.middleRows(i * c.rows(), c.rows()) = block;
    block = block * a;
  }
  return gam;
}

// B and D from the Toeplitz structure of the input-driven part.
void solve_bd(const Mat& r, const Layout& lay, const Mat& a, const Mat& c, Mat& b, Mat& d) {
  const Index n = a.rows();
  const Index l = lay.q;
  const Index m = lay.m;
  const Index k = lay.k;
  const Index mi2 = 2 * lay.mi();

  const Mat gam = observability(a, c, k);
  const Mat gamm = gam.topRows(lay.li() - l);
  const Mat gam_inv = linalg::pinv(gam);
  const Mat gamm_inv = linalg::pinv(gamm);
  const Regression reg = state_regression(r, lay, gam, n);

  Mat ac(n + l, n);
  ac << a, c;
  const Mat resid = (reg.lhs - ac * reg.rhs.topRows(n)).leftCols(mi2);
  const Mat future_inputs = r.block(lay.uf(), 0, lay.mi(), mi2);

  const Mat l1 = a * gam_inv;
  const Mat l2 = c * gam_inv;
  Mat mm = Mat::Zero(n, lay.li());
  mm.rightCols(lay.li() - l) = gamm_inv;
  Mat x = Mat::Zero(lay.li(), l + n);
  x.topLeftCorner(l, l).setIdentity();
  x.bottomRightCorner(lay.li() - l, n) = gamm;

  Mat totm = Mat::Zero(mi2 * (n + l), m * (l + n));
  for (Index i = 0; i < k; ++i) {
    const Index width = lay.li() - i * l;
    Mat nk = Mat::Zero(n + l, lay.li());
    nk.topLeftCorner(n, width) = mm.rightCols(width) - l1.rightCols(width);
    nk.bottomLeftCorner(l, width) = -l2.rightCols(width);
    if (i == 0) nk.block(n, 0, l, l) += Mat::Identity(l, l);
    totm += kron(future_inputs.middleRows(i * m, m).transpose(), nk * x);
  }
  const Vec rhs = Eigen::Map<const Vec>(resid.data(), resid.size());
  const Vec sol = linalg::lstsq(totm, rhs);
  const Mat bd = Eigen::Map<const Mat>(sol.data(), l + n, m);
  d = bd.topRows(l);
  b = bd.bottomRows(n);
}

// Average of the (a + lag, a) blocks of a block-Toeplitz covariance.
Mat lag_block(const Mat& sigma, Index offset, Index size, Index blocks, Index lag) {
  Mat acc = Mat::Zero(size, size);
  for (Index a = 0; a + lag < blocks; ++a) acc += sigma.block(offset + (a + lag) * size, offset + a * size, size, size);
  return acc / static_cast<double>(blocks - lag);
}

// Fraction of each normalised output variance carried by C x + D u. The
// remainder is the unit probit noise absorbed by the unit-diagonal convention.
Vec probit_signal_fraction(const Mat& sigma, const Layout& lay, const SystemParams& est) {
  const Index span = 2 * lay.k;
  const Index q = lay.q;
  const Index p = est.A.rows();
  const Mat su = lay.m > 0 ? lag_block(sigma, 0, lay.m, span, 0) : Mat(0, 0);

  Mat lhs((span - 1) * q, p);
  Mat rhs((span - 1) * q, q);
  Mat ca_prev = est.C;  // C A^{lag-1}
  for (Index lag = 1; lag < span; ++lag) {
    const Mat ca = ca_prev * est.A;
    Mat target = lag_block(sigma, lay.zp(), q, span, lag);
    if (lay.m > 0) target -= ca_prev * est.B * su * est.D.transpose();
    lhs.middleRows((lag - 1) * q, q) = ca;
    rhs.middleRows((lag - 1) * q, q) = target;
    ca_prev = ca;
  }
  const Mat g = linalg::lstsq(lhs, rhs);  // P C^T
  Vec frac = (est.C * g).diagonal();
  if (lay.m > 0) frac += (est.D * su * est.D.transpose()).diagonal();
  return frac.cwiseMax(0.0).cwiseMin(0.999);
}

int elbow_index(const std::vector<double>& s) {
  int best = 0;
  double best_ratio = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i + 1] <= 0.0) {
      if (s[i] > 0.0) return static_cast<int>(i + 1);
      break;
    }
    const double ratio = s[i] / s[i + 1];
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = static_cast<int>(i + 1);
    }
  }
  return best;
}

std::vector<double> to_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Mat cholesky_R(const Mat& sigma) { return linalg::lower_cholesky(sigma); }

std::vector<double> hankel_spectrum(const Mat& r, const HankelConfig& cfg, const Dimensions& dims,
                                    const N4sidOptions& options) {
  cfg.validate();
  const Layout lay{cfg.k, dims.q, dims.m};
  const Projection proj = oblique_projection(r, lay, options.weighting);
  Eigen::BDCSVD<Mat> svd(proj.weighted);
  return to_vector(svd.singularValues());
}

SsidResult n4sid(const Mat& r, const HankelConfig& cfg, const Dimensions& dims, int p,
                 const N4sidOptions& options) {
  cfg.validate(p);
  if (p < 1) throw ConfigError("latent dimension p must be >= 1");
  const Layout lay{cfg.k, dims.q, dims.m};
  const Index l = lay.q;
  const Index n = p;

  const Projection proj = oblique_projection(r, lay, options.weighting);
  Eigen::BDCSVD<Mat> svd(proj.weighted, Eigen::ComputeThinU);
  const Vec s = svd.singularValues();

  SsidResult out;
  out.chosen_p = p;
  out.singular_values = to_vector(s);
  out.diagnostics.cond_future_inputs = proj.cond_ru;
  out.diagnostics.cond_past_projection = proj.cond_rpp;
  out.diagnostics.elbow = elbow_index(out.singular_values);
  out.diagnostics.weighting = options.weighting == N4sidOptions::Weighting::kCva ? "CVA" : "N4SID (unit weights)";

  if (s.size() < n || !(s(n - 1) > linalg::kPinvRelTol * s(0))) {
    std::ostringstream msg;
    msg << "projection has numerical rank below p=" << p << " (singular values";
    for (Index i = 0; i < std::min<Index>(s.size(), n + 1); ++i) msg << ' ' << s(i);
    msg << "); reduce p or increase N";
    throw NumericalError(msg.str());
  }

  Mat u1 = svd.matrixU().leftCols(n);
  if (proj.left.size() > 0) u1 = proj.left * u1;
  const Mat gam = u1 * s.head(n).cwiseSqrt().asDiagonal();

  SystemParams est = SystemParams::zeros({p, dims.q, dims.m});
  const Regression reg = state_regression(r, lay, gam, n);
  const Mat sol = reg.lhs * linalg::pinv(reg.rhs);
  const Mat res = reg.lhs - sol * reg.rhs;
  out.diagnostics.state_residual_norm = res.norm();

  const bool shift_ok = (lay.k - 1) * l >= n;
  const bool use_shift = options.a_route == N4sidOptions::ARoute::kShiftInvariance ||
                         (options.a_route == N4sidOptions::ARoute::kAuto && shift_ok);
  if (use_shift && !shift_ok) throw ConfigError("shift invariance needs (k - 1) q >= p");
  if (use_shift) {
    est.A = linalg::lstsq(gam.topRows(lay.li() - l), gam.bottomRows(lay.li() - l));
    out.diagnostics.a_route = "shift-invariance";
  } else {
    est.A = sol.topLeftCorner(n, n);
    out.diagnostics.a_route = "state-regression";
  }
  est.C = gam.topRows(l);
  if (!est.A.allFinite() || !est.C.allFinite()) throw NumericalError("N4SID produced non-finite A or C");

  if (dims.m > 0) solve_bd(r, lay, est.A, est.C, est.B, est.D);

  const Mat cov = res * res.transpose();
  est.Q = linalg::nearest_psd(cov.topLeftCorner(n, n), 0.0).matrix;

  const Mat sigma = r * r.transpose();
  if (options.restore_probit_scale) {
    const Vec frac = probit_signal_fraction(sigma, lay, est);
    const Vec gain = (1.0 - frac.array()).rsqrt().matrix();
    est.C = gain.asDiagonal() * est.C;
    est.D = gain.asDiagonal() * est.D;
    out.diagnostics.scale_restored = true;
    out.diagnostics.probit_signal_fraction = to_vector(frac);
  }

  Mat drive = est.Q;
  if (dims.m > 0) drive += est.B * lag_block(sigma, 0, dims.m, 2 * lay.k, 0) * est.B.transpose();
  try {
    est.Q0 = stationary_latent_cov(est.A, drive);
  } catch (const StabilityError&) {
    warn("estimated A is not stable; Q0 set to the one-step drive covariance");
    est.Q0 = linalg::symmetrize(drive);
  }
  est.mu0 = Vec::Zero(n);
  out.params = std::move(est);
  return out;
}

SsidResult fit_from_moments(const ConvertedMoments& cm, int p, const N4sidOptions& options) {
  const HankelConfig cfg{cm.k, cm.lag_pooled};
  return n4sid(cm.R, cfg, Dimensions{p, cm.q, cm.m}, p, options);
}

SsidResult gauss_baseline(const TimeSeries& ts, const HankelConfig& cfg, int p) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate(p);
  const StackedMoments sm = build_hankel_moments_real(ts.u, ts.y, ts.segments(), cfg);
  SsidResult out = fit_from_moments(gaussian_moments(sm), p, {});
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

SsidResult fit_bestlds(const TimeSeries& ts, const HankelConfig& cfg, int p) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate(p);
  const ConvertedMoments cm = convert(build_hankel_moments(ts, cfg));
  SsidResult out = fit_from_moments(cm, p, N4sidOptions{.restore_probit_scale = true});
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace bestlds
