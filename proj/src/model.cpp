#include "bestlds/model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include "bestlds/errors.hpp"
#include "bestlds/log.hpp"

namespace bestlds {
namespace {

void require_shape(const Mat& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream msg;
    msg << name << " has shape " << m.rows() << "x" << m.cols() << ", expected " << rows << "x" << cols;
    throw ParameterError(msg.str());
  }
}

void require_psd(const Mat& m, const char* name) {
  if (!m.allFinite()) throw ParameterError(std::string(name) + " has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw ParameterError(std::string(name) + " is not symmetric");
  }
  if (m.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Mat> eig(linalg::symmetrize(m), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9 * scale) {
    throw ParameterError(std::string(name) + " is not positive semidefinite");
  }
}

/// Symmetric square root of a PSD matrix, used to draw correlated normals.
Mat psd_sqrt(const Mat& m) {
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Mat> eig(linalg::symmetrize(m));
  const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

Mat standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Mat out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = gauss(rng);
  return out;
}

/// Standard-normal draw with orthonormal columns (or rows, if wide), times s.
Mat orthonormal_scaled(Eigen::Index rows, Eigen::Index cols, double s, std::mt19937_64& rng) {
  const bool tall = rows >= cols;
  const Mat draw = standard_normal(tall ? rows : cols, tall ? cols : rows, rng);
  Eigen::HouseholderQR<Mat> qr(draw);
  Mat q = qr.householderQ() * Mat::Identity(draw.rows(), draw.cols());
  // fix the sign ambiguity of QR so the frame is a continuous function of the draw
  const Mat r = qr.matrixQR().topRows(draw.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return s * (tall ? q : Mat(q.transpose()));
}

/// V diag(lambda) V^{-1} with lambda uniform in [lo, hi] and V a
/// standard-normal draw (redrawn while badly conditioned).
Mat eigen_in_range(Eigen::Index n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> value(lo, hi);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Mat v = standard_normal(n, n, rng);
    Vec lambda(n);
    for (Eigen::Index i = 0; i < n; ++i) lambda(i) = value(rng);
    Eigen::JacobiSVD<Mat> svd(v);
    const Vec& sv = svd.singularValues();
    if (sv(n - 1) <= 0.0 || sv(0) / sv(n - 1) > 100.0) continue;
    return v * lambda.asDiagonal() * v.inverse();
  }
  throw NumericalError("could not construct a matrix with the requested eigenvalue range");
}

}  // namespace

void Dimensions::validate() const {
  if (p < 1 || q < 1 || m < 0) {
    std::ostringstream msg;
    msg << "invalid dimensions p=" << p << " q=" << q << " m=" << m;
    throw ParameterError(msg.str());
  }
}

Dimensions SystemParams::dims() const {
  return {static_cast<int>(A.rows()), static_cast<int>(C.rows()), static_cast<int>(B.cols())};
}

void SystemParams::validate() const {
  const auto d = dims();
  d.validate();
  require_shape(A, d.p, d.p, "A");
  require_shape(B, d.p, d.m, "B");
  require_shape(C, d.q, d.p, "C");
  require_shape(D, d.q, d.m, "D");
  require_shape(Q, d.p, d.p, "Q");
  require_shape(Q0, d.p, d.p, "Q0");
  if (mu0.size() != d.p) throw ParameterError("mu0 has the wrong length");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite() || !mu0.allFinite()) {
    throw ParameterError("system matrices contain non-finite entries");
  }
  require_psd(Q, "Q");
  require_psd(Q0, "Q0");
}

SystemParams SystemParams::zeros(const Dimensions& d) {
  d.validate();
  SystemParams s;
  s.A = Mat::Zero(d.p, d.p);
  s.B = Mat::Zero(d.p, d.m);
  s.C = Mat::Zero(d.q, d.p);
  s.D = Mat::Zero(d.q, d.m);
  s.Q = Mat::Identity(d.p, d.p);
  s.mu0 = Vec::Zero(d.p);
  s.Q0 = Mat::Identity(d.p, d.p);
  return s;
}

InputSpec InputSpec::gaussian(Vec mean, Mat cov) {
  InputSpec s;
  s.kind = Kind::kGaussian;
  s.mean = std::move(mean);
  s.scale = std::move(cov);
  s.validate();
  return s;
}

InputSpec InputSpec::student_t(double dof, Mat scale) {
  InputSpec s;
  s.kind = Kind::kStudentT;
  s.dof = dof;
  s.mean = Vec::Zero(scale.rows());
  s.scale = std::move(scale);
  s.validate();
  return s;
}

Mat InputSpec::covariance() const {
  if (kind == Kind::kGaussian) return scale;
  if (dof <= 2.0) throw ParameterError("student-t inputs with dof <= 2 have no covariance");
  return scale * (dof / (dof - 2.0));
}

void InputSpec::validate() const {
  require_shape(scale, mean.size(), mean.size(), "input covariance");
  require_psd(scale, "input covariance");
  if (kind == Kind::kStudentT && !(dof > 0.0)) throw ParameterError("student-t dof must be > 0");
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> TimeSeries::segments() const {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  const Eigen::Index n = length();
  if (trial_bounds.empty()) {
    out.emplace_back(0, n);
    return out;
  }
  for (std::size_t i = 0; i < trial_bounds.size(); ++i) {
    const Eigen::Index end = i + 1 < trial_bounds.size() ? trial_bounds[i + 1] : n;
    out.emplace_back(trial_bounds[i], end);
  }
  return out;
}

TimeSeries TimeSeries::select_segments(const std::vector<int>& which) const {
  const auto segs = segments();
  Eigen::Index total = 0;
  for (int w : which) {
    if (w < 0 || static_cast<std::size_t>(w) >= segs.size()) throw ConfigError("segment index out of range");
    total += segs[w].second - segs[w].first;
  }
  TimeSeries out;
  out.u.resize(total, u.cols());
  out.y.resize(total, y.cols());
  if (x) out.x = Mat(total, x->cols());
  if (z) out.z = Mat(total, z->cols());
  Eigen::Index at = 0;
  for (int w : which) {
    const auto [b, e] = segs[w];
    const Eigen::Index len = e - b;
    out.trial_bounds.push_back(at);
    out.u.middleRows(at, len) = u.middleRows(b, len);
    out.y.middleRows(at, len) = y.middleRows(b, len);
    if (x) out.x->middleRows(at, len) = x->middleRows(b, len);
    if (z) out.z->middleRows(at, len) = z->middleRows(b, len);
    at += len;
  }
  return out;
}

void TimeSeries::validate() const {
  if (u.rows() != y.rows()) throw ParameterError("u and y must have the same number of rows");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y.data()[i];
    if (v != 0.0 && v != 1.0) throw ParameterError("y entries must be 0 or 1");
  }
  if (!u.allFinite()) throw ParameterError("u contains non-finite entries");
  if (!trial_bounds.empty()) {
    if (trial_bounds.front() != 0) throw ParameterError("trial bounds must start at 0");
    for (std::size_t i = 1; i < trial_bounds.size(); ++i) {
      if (trial_bounds[i] <= trial_bounds[i - 1]) throw ParameterError("trial bounds must be strictly increasing");
    }
    if (trial_bounds.back() >= length()) throw ParameterError("trial bound beyond the end of the series");
  }
  if (x && x->rows() != length()) throw ParameterError("latent trace length mismatch");
  if (z && (z->rows() != length() || z->cols() != y.cols())) throw ParameterError("z trace shape mismatch");
}

PresetId parse_preset(const std::string& name) {
  if (name.size() == 1 && name[0] >= 'A' && name[0] <= 'G') return static_cast<PresetId>(name[0] - 'A');
  if (name.size() == 1 && name[0] >= 'a' && name[0] <= 'g') return static_cast<PresetId>(name[0] - 'a');
  throw ConfigError("unknown preset '" + name + "' (expected A..G)");
}

std::string preset_name(PresetId id) { return std::string(1, static_cast<char>('A' + static_cast<int>(id))); }

Mat rotation_matrix(double theta) {
  Mat r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

Mat stationary_latent_cov(const Mat& a, const Mat& q) { return linalg::solve_discrete_lyapunov(a, q); }

Mat stationary_output_cov(const SystemParams& params, const Mat& input_cov) {
  const Mat drive = params.Q + params.B * input_cov * params.B.transpose();
  const Mat p = stationary_latent_cov(params.A, drive);
  return linalg::symmetrize(params.C * p * params.C.transpose() + params.D * input_cov * params.D.transpose());
}

SystemParams normalize_emissions(const SystemParams& params, const Mat& input_cov) {
  const Mat cov = stationary_output_cov(params, input_cov);
  SystemParams out = params;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    if (!(cov(i, i) > 0.0)) throw ParameterError("output channel with zero stationary variance");
    const double s = 1.0 / std::sqrt(cov(i, i));
    out.C.row(i) *= s;
    out.D.row(i) *= s;
  }
  return out;
}

Preset make_preset(PresetId id, std::uint64_t seed, const PresetOptions& options) {
  if (!(options.rotation_radius > 0.0 && options.rotation_radius <= 1.0)) {
    throw ConfigError("rotation_radius must lie in (0, 1]");
  }
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(id) + 1)));
  Preset out;
  SystemParams& s = out.params;
  int p = 0, q = 0, m = 3;
  double q_scale = 0.1;
  switch (id) {
    case PresetId::A: q = 1, p = 3; break;
    case PresetId::B: q = 10, p = 5; break;
    case PresetId::C: q = 8, p = 6, m = 4; break;
    case PresetId::D: q = 5, p = 2, q_scale = 1e-4; break;
    case PresetId::E: q = 5, p = 2; break;
    case PresetId::F: q = 10, p = 5; break;
    case PresetId::G: q = 1, p = 2, q_scale = 1e-3; break;
  }

  switch (id) {
    case PresetId::A:
    case PresetId::B:
    case PresetId::F:
      s.A = eigen_in_range(p, 0.9, 0.99, rng);
      break;
    case PresetId::C:
      s.A = eigen_in_range(p, 0.5, 0.9, rng);
      break;
    case PresetId::D:
      s.A = options.rotation_radius * rotation_matrix(std::numbers::pi / 48.0);
      break;
    case PresetId::E:
      s.A = options.rotation_radius * rotation_matrix(std::numbers::pi / 2.0);
      break;
    case PresetId::G:
      s.A = options.rotation_radius * rotation_matrix(std::numbers::pi / 400.0);
      break;
  }

  if (id == PresetId::G) {
    s.B = 0.01 * standard_normal(p, m, rng);
    s.C = 0.25 * standard_normal(q, p, rng);
    s.D = 0.2 * standard_normal(q, m, rng);
  } else {
    const double c_scale = id == PresetId::C ? 10.0 : (id == PresetId::D || id == PresetId::E) ? 1e4 : 0.1;
    s.B = orthonormal_scaled(p, m, 0.1, rng);
    s.C = orthonormal_scaled(q, p, c_scale, rng);
    s.D = orthonormal_scaled(q, m, 0.1, rng);
  }
  s.Q = q_scale * Mat::Identity(p, p);
  s.mu0 = Vec::Zero(p);

  switch (id) {
    case PresetId::D:
      out.inputs = InputSpec::gaussian(Vec::Zero(m), 1e-4 * Mat::Identity(m, m));
      break;
    case PresetId::E:
      out.inputs = InputSpec::gaussian(Vec::Zero(m), 0.1 * Mat::Identity(m, m));
      break;
    case PresetId::F:
      out.inputs = InputSpec::student_t(3.0, Mat::Identity(m, m));
      break;
    default:
      out.inputs = InputSpec::gaussian(Vec::Zero(m), Mat::Identity(m, m));
      break;
  }

  const Mat input_cov = out.inputs.covariance();
  const bool stable = linalg::spectral_radius(s.A) < 1.0 - 1e-12;
  if (stable) {
    s.Q0 = stationary_latent_cov(s.A, s.Q + s.B * input_cov * s.B.transpose());
    if (options.normalize_emissions) s = normalize_emissions(s, input_cov);
  } else {
    // marginally stable rotation: no stationary law exists, start from one step of noise
    s.Q0 = s.Q;
  }
  s.validate();
  return out;
}

TimeSeries simulate(const SystemParams& params, const InputSpec& inputs, Eigen::Index n,
                    std::uint64_t seed, int n_trials) {
  if (n < 1) throw ConfigError("simulate: N must be >= 1");
  if (n_trials < 1 || n_trials > n) throw ConfigError("simulate: invalid trial count");
  params.validate();
  inputs.validate();
  const auto d = params.dims();
  if (inputs.dim() != d.m) throw ParameterError("input spec dimension does not match B");
  const double radius = linalg::spectral_radius(params.A);
  if (radius > 1.0 + 1e-9) throw StabilityError("simulate: spectral radius of A exceeds 1");
  if (radius > 1.0 - 1e-12) warn("simulate: A is marginally stable (spectral radius 1)");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto normals = [&](Eigen::Index k) {
    Vec v(k);
    for (Eigen::Index i = 0; i < k; ++i) v(i) = gauss(rng);
    return v;
  };

  const Mat q_root = psd_sqrt(params.Q);
  const Mat q0_root = psd_sqrt(params.Q0);
  const Mat u_root = psd_sqrt(inputs.scale);
  std::chi_squared_distribution<double> chi2(inputs.kind == InputSpec::Kind::kStudentT ? inputs.dof : 1.0);

  TimeSeries ts;
  ts.u.resize(n, d.m);
  ts.y.resize(n, d.q);
  ts.x = Mat(n, d.p);
  ts.z = Mat(n, d.q);

  const Eigen::Index base = n / n_trials;
  Vec x;
  for (Eigen::Index t = 0; t < n; ++t) {
    const bool starts_trial = t % base == 0 && t / base < n_trials;
    if (starts_trial) {
      if (n_trials > 1) ts.trial_bounds.push_back(t);
      x = params.mu0 + q0_root * normals(d.p);
    }
    Vec u = inputs.mean;
    if (d.m > 0) {
      Vec g = u_root * normals(d.m);
      if (inputs.kind == InputSpec::Kind::kStudentT) g /= std::sqrt(chi2(rng) / inputs.dof);
      u += g;
    }
    const Vec z = params.C * x + params.D * u;
    const Vec noise = normals(d.q);  // probit threshold noise: y = 1{z + e >= 0}
    ts.u.row(t) = u.transpose();
    ts.x->row(t) = x.transpose();
    ts.z->row(t) = z.transpose();
    for (int i = 0; i < d.q; ++i) ts.y(t, i) = z(i) + noise(i) >= 0.0 ? 1.0 : 0.0;
    x = params.A * x + params.B * u + q_root * normals(d.p);
  }
  return ts;
}

NoiselessTrace simulate_noiseless(const SystemParams& params, const Mat& u) {
  const auto d = params.dims();
  if (u.cols() != d.m) throw ParameterError("simulate_noiseless: input width does not match B");
  const Eigen::Index n = u.rows();
  NoiselessTrace out{Mat(n, d.p), Mat(n, d.q), Mat(n, d.q)};
  Vec x = params.mu0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const Vec ut = u.row(t).transpose();
    const Vec z = params.C * x + params.D * ut;
    out.x.row(t) = x.transpose();
    out.z.row(t) = z.transpose();
    for (int i = 0; i < d.q; ++i) out.y(t, i) = z(i) >= 0.0 ? 1.0 : 0.0;
    x = params.A * x + params.B * ut;
  }
  return out;
}

}  // namespace bestlds
