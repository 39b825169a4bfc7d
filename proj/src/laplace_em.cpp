#include "bestlds/laplace_em.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "bestlds/errors.hpp"
#include "bestlds/log.hpp"
#include "bestlds/metrics.hpp"
#include "bestlds/normal.hpp"
#include "bestlds/ssid.hpp"

namespace bestlds {
namespace {

using Index = Eigen::Index;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Precision {
  Mat inv;
  double logdet = 0.0;
};

Precision invert_spd(const Mat& m, const char* name) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << name << " must be positive definite for the Laplace E-step";
    throw ParameterError(msg.str());
  }
  Precision out;
  out.inv = llt.solve(Mat::Identity(m.rows(), m.cols()));
  out.logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return out;
}

// Signs s = 2y - 1 as an N x q matrix.
Mat signs_of(const Mat& y) { return (2.0 * y.array() - 1.0).matrix(); }

Mat emissions(const SystemParams& params, const TimeSeries& ts, const Mat& x) {
  Mat z = x * params.C.transpose();
  if (ts.m() > 0) z += ts.u * params.D.transpose();
  return z;
}

// Transition residuals x_t - A x_{t-1} - B u_{t-1}; zero rows at trial starts.
Mat transition_residuals(const SystemParams& params, const TimeSeries& ts, const Mat& x,
                         const std::vector<bool>& starts) {
  const Index n = x.rows();
  Mat r = Mat::Zero(n, x.cols());
  if (n < 2) return r;
  r.bottomRows(n - 1) = x.bottomRows(n - 1) - x.topRows(n - 1) * params.A.transpose();
  if (ts.m() > 0) r.bottomRows(n - 1) -= ts.u.topRows(n - 1) * params.B.transpose();
  for (Index t = 0; t < n; ++t) {
    if (starts[t]) r.row(t).setZero();
  }
  return r;
}

std::vector<bool> trial_starts(const TimeSeries& ts) {
  std::vector<bool> starts(ts.length(), false);
  for (const auto& [b, e] : ts.segments()) {
    if (b < e) starts[b] = true;
  }
  return starts;
}

struct Model {
  const SystemParams& params;
  const TimeSeries& ts;
  std::vector<bool> starts;
  Precision q, q0;
  Mat signs;
  int n_trials = 0;

  Model(const SystemParams& p, const TimeSeries& t)
      : params(p), ts(t), starts(trial_starts(t)), q(invert_spd(p.Q, "Q")), q0(invert_spd(p.Q0, "Q0")),
        signs(signs_of(t.y)) {
    for (bool s : starts) n_trials += s ? 1 : 0;
  }

  double evaluate(const Mat& x, Mat* grad, Mat* curvature) const {
    const Index n = x.rows();
    const Index p = x.cols();
    const double norm_q = -0.5 * (q.logdet + static_cast<double>(p) * normal::kLog2Pi);
    const double norm_q0 = -0.5 * (q0.logdet + static_cast<double>(p) * normal::kLog2Pi);

    double f = 0.0;
    if (grad) grad->setZero(n, p);
    const Mat resid = transition_residuals(params, ts, x, starts);
    const Mat scaled = resid * q.inv;  // rows r_t^T Q^{-1}
    f += -0.5 * (scaled.array() * resid.array()).sum() + norm_q * static_cast<double>(n - n_trials);
    if (grad) {
      *grad -= scaled;
      if (n > 1) grad->topRows(n - 1) += scaled.bottomRows(n - 1) * params.A;
    }
    for (Index t = 0; t < n; ++t) {
      if (!starts[t]) continue;
      const Vec d = x.row(t).transpose() - params.mu0;
      const Vec qd = q0.inv * d;
      f += -0.5 * d.dot(qd) + norm_q0;
      if (grad) grad->row(t) -= qd.transpose();
    }

    const Mat z = emissions(params, ts, x);
    Mat dl(z.rows(), z.cols());
    if (curvature) curvature->resize(z.rows(), z.cols());
    for (Index t = 0; t < z.rows(); ++t) {
      for (Index i = 0; i < z.cols(); ++i) {
        const double s = signs(t, i);
        const double sz = s * z(t, i);
        f += normal::log_cdf(sz);
        const double lambda = normal::inv_mills(sz);
        dl(t, i) = s * lambda;
        if (curvature) (*curvature)(t, i) = lambda * (sz + lambda);
      }
    }
    if (grad) *grad += dl * params.C;
    return f;
  }
};

struct BlockSolve {
  std::vector<Eigen::LLT<Mat>> schur;
  double logdet = 0.0;
};

// Forward block elimination of the tridiagonal H; lower[t] = H_{t+1,t}.
BlockSolve factor(const std::vector<Mat>& diag, const std::vector<Mat>& lower) {
  BlockSolve out;
  const std::size_t n = diag.size();
  out.schur.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    Mat s = diag[t];
    if (t > 0) {
      const Mat k = out.schur[t - 1].solve(lower[t - 1].transpose());  // S^{-1} O^T
      s -= lower[t - 1] * k;
    }
    out.schur.emplace_back(linalg::symmetrize(s));
    if (out.schur.back().info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "posterior Hessian lost positive definiteness at step " << t;
      throw NumericalError(msg.str());
    }
    out.logdet += 2.0 * out.schur.back().matrixLLT().diagonal().array().log().sum();
  }
  return out;
}

Mat block_solve(const BlockSolve& f, const std::vector<Mat>& lower, const Mat& rhs) {
  const Index n = rhs.rows();
  Mat r = rhs;
  for (Index t = 1; t < n; ++t) {
    const Vec prev = f.schur[t - 1].solve(r.row(t - 1).transpose());
    r.row(t) -= (lower[t - 1] * prev).transpose();
  }
  Mat out(n, rhs.cols());
  for (Index t = n - 1; t >= 0; --t) {
    Vec v = r.row(t).transpose();
    if (t + 1 < n) v -= lower[t].transpose() * out.row(t + 1).transpose();
    out.row(t) = f.schur[t].solve(v).transpose();
  }
  return out;
}

void build_hessian(const Model& model, const Mat& curvature, std::vector<Mat>& diag, std::vector<Mat>& lower) {
  const SystemParams& prm = model.params;
  const Index n = curvature.rows();
  const Index p = prm.A.rows();
  const Mat ata = prm.A.transpose() * model.q.inv * prm.A;
  const Mat off = -model.q.inv * prm.A;
  diag.assign(n, Mat::Zero(p, p));
  lower.assign(n > 0 ? n - 1 : 0, Mat::Zero(p, p));
  for (Index t = 0; t < n; ++t) {
    Mat& d = diag[t];
    d = model.starts[t] ? model.q0.inv : model.q.inv;
    const bool continues = t + 1 < n && !model.starts[t + 1];
    if (continues) {
      d += ata;
      lower[t] = off;
    }
    d += prm.C.transpose() * curvature.row(t).asDiagonal() * prm.C;
  }
}

Mat prior_mean_path(const SystemParams& params, const TimeSeries& ts, const std::vector<bool>& starts) {
  const Index n = ts.length();
  Mat x(n, params.A.rows());
  for (Index t = 0; t < n; ++t) {
    if (starts[t]) {
      x.row(t) = params.mu0.transpose();
    } else {
      Vec next = params.A * x.row(t - 1).transpose();
      if (ts.m() > 0) next += params.B * ts.u.row(t - 1).transpose();
      x.row(t) = next.transpose();
    }
  }
  return x;
}

// Probabilists' Gauss-Hermite rule: E[g(xi)] ~ sum w_k g(node_k), xi ~ N(0, 1).
struct Hermite {
  Vec nodes, weights;
};

const Hermite& hermite_rule(int n) {
  thread_local std::vector<Hermite> cache;
  if (cache.size() <= static_cast<std::size_t>(n)) cache.resize(n + 1);
  Hermite& rule = cache[n];
  if (rule.nodes.size() == n) return rule;
  Mat jac = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Mat> eig(jac);
  rule.nodes = std::numbers::sqrt2 * eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).transpose().array().square();
  return rule;
}

// Moments of log Phi(s z) for z ~ N(a, var): value, first and second derivative in z.
struct ProbitExpectation {
  double value = 0.0, d1 = 0.0, d2 = 0.0;
};

ProbitExpectation expect_probit(double a, double var, double s, const Hermite& rule) {
  ProbitExpectation e;
  const double sd = std::sqrt(std::max(var, 0.0));
  for (Index k = 0; k < rule.nodes.size(); ++k) {
    const double sz = s * (a + sd * rule.nodes(k));
    const double lambda = normal::inv_mills(sz);
    e.value += rule.weights(k) * normal::log_cdf(sz);
    e.d1 += rule.weights(k) * s * lambda;
    e.d2 -= rule.weights(k) * lambda * (sz + lambda);
  }
  return e;
}

struct Stats {
  Mat sxx;      // sum E[x_t x_t^T] over transition targets
  Mat sxphi;    // sum E[x_t phi_{t-1}^T]
  Mat sphiphi;  // sum E[phi_{t-1} phi_{t-1}^T]
  Index transitions = 0;
  std::vector<Index> firsts;
};

Stats transition_stats(const PosteriorApprox& post, const TimeSeries& ts) {
  const Index p = post.mode.cols();
  const Index m = ts.m();
  Stats st;
  st.sxx = Mat::Zero(p, p);
  st.sxphi = Mat::Zero(p, p + m);
  st.sphiphi = Mat::Zero(p + m, p + m);
  for (const auto& [b, e] : ts.segments()) {
    st.firsts.push_back(b);
    for (Index t = b + 1; t < e; ++t) {
      const Vec xt = post.mode.row(t).transpose();
      const Vec xp = post.mode.row(t - 1).transpose();
      Vec phi(p + m);
      phi.head(p) = xp;
      if (m > 0) phi.tail(m) = ts.u.row(t - 1).transpose();
      st.sxx += post.cov[t] + xt * xt.transpose();
      st.sxphi += xt * phi.transpose();
      st.sxphi.leftCols(p) += post.cross[t - 1].transpose();
      st.sphiphi += phi * phi.transpose();
      st.sphiphi.topLeftCorner(p, p) += post.cov[t - 1];
      ++st.transitions;
    }
  }
  return st;
}

Mat floor_cov(const Mat& m, double floor) { return linalg::nearest_psd(m, floor).matrix; }

double emission_objective(const Vec& theta, int row, const PosteriorApprox& post, const TimeSeries& ts,
                          const Hermite& rule) {
  const Index p = post.mode.cols();
  const Index m = ts.m();
  const Vec c = theta.head(p);
  double total = 0.0;
  for (Index t = 0; t < ts.length(); ++t) {
    double a = post.mode.row(t).dot(c);
    if (m > 0) a += ts.u.row(t).dot(theta.tail(m));
    const double var = c.dot(post.cov[t] * c);
    total += expect_probit(a, var, ts.y(t, row) > 0.5 ? 1.0 : -1.0, rule).value;
  }
  return total;
}

// Newton ascent with Armijo backtracking for one row of (C, D).
Vec update_emission_row(Vec theta, int row, const PosteriorApprox& post, const TimeSeries& ts, const EMConfig& cfg) {
  const Index p = post.mode.cols();
  const Index m = ts.m();
  const Hermite& rule = hermite_rule(cfg.quadrature_nodes);
  double current = emission_objective(theta, row, post, ts, rule);
  for (int step = 0; step < cfg.emission_newton_steps; ++step) {
    const Vec c = theta.head(p);
    Vec grad = Vec::Zero(p + m);
    Mat hess = Mat::Zero(p + m, p + m);
    for (Index t = 0; t < ts.length(); ++t) {
      Vec phi(p + m);
      phi.head(p) = post.mode.row(t).transpose();
      if (m > 0) phi.tail(m) = ts.u.row(t).transpose();
      const Vec vc = post.cov[t] * c;
      const auto e = expect_probit(phi.dot(theta), c.dot(vc), ts.y(t, row) > 0.5 ? 1.0 : -1.0, rule);
      grad += e.d1 * phi;
      grad.head(p) += e.d2 * vc;
      hess += e.d2 * phi * phi.transpose();
      hess.topLeftCorner(p, p) += e.d2 * post.cov[t];
    }
    if (grad.cwiseAbs().maxCoeff() < 1e-9) break;
    Eigen::LDLT<Mat> ldlt(-hess);
    Vec dir = ldlt.info() == Eigen::Success ? Vec(ldlt.solve(grad)) : grad;
    if (!dir.allFinite() || dir.dot(grad) <= 0.0) dir = grad;
    double alpha = 1.0;
    bool accepted = false;
    for (int back = 0; back < 20; ++back, alpha *= 0.5) {
      const Vec trial = theta + alpha * dir;
      const double value = emission_objective(trial, row, post, ts, rule);
      if (value >= current + 1e-4 * alpha * grad.dot(dir)) {
        theta = trial;
        current = value;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return theta;
}

}  // namespace

void EMConfig::validate() const {
  if (max_iters < 1) throw ConfigError("EM max_iters must be >= 1");
  if (!(gain_tol > 0.0) || !(evidence_tol_bits > 0.0)) throw ConfigError("EM tolerances must be > 0");
  if (newton.max_steps < 1 || !(newton.grad_tol > 0.0)) throw ConfigError("invalid Newton settings");
  if (!(variance_floor > 0.0)) throw ConfigError("variance floor must be > 0");
  if (quadrature_nodes < 2) throw ConfigError("quadrature_nodes must be >= 2");
}

double log_joint(const SystemParams& params, const TimeSeries& ts, const Mat& x, Mat* grad) {
  const Model model(params, ts);
  return model.evaluate(x, grad, nullptr);
}

PosteriorApprox e_step(const SystemParams& params, const TimeSeries& ts, const NewtonConfig& newton,
                       const Mat* warm_start) {
  params.validate();
  const Index n = ts.length();
  const Index p = params.A.rows();
  if (ts.q() != params.C.rows() || ts.m() != params.B.cols()) {
    throw ParameterError("e_step: parameter and data dimensions disagree");
  }
  const Model model(params, ts);

  PosteriorApprox post;
  post.mode = warm_start && warm_start->rows() == n && warm_start->cols() == p
                  ? *warm_start
                  : prior_mean_path(params, ts, model.starts);

  Mat grad, curvature;
  double f = model.evaluate(post.mode, &grad, &curvature);
  bool converged = false;
  for (int step = 0; step < newton.max_steps; ++step) {
    post.grad_norm = grad.cwiseAbs().maxCoeff();
    if (post.grad_norm < newton.grad_tol) {
      converged = true;
      break;
    }
    build_hessian(model, curvature, post.diag, post.lower);
    const Mat dir = block_solve(factor(post.diag, post.lower), post.lower, grad);
    const double slope = (grad.array() * dir.array()).sum();
    double alpha = 1.0;
    bool accepted = false;
    Mat trial_grad, trial_curv;
    for (int back = 0; back <= 20; ++back, alpha *= 0.5) {
      const Mat trial = post.mode + alpha * dir;
      const double value = model.evaluate(trial, &trial_grad, &trial_curv);
      if (value >= f + 1e-4 * alpha * slope) {
        post.mode = trial;
        f = value;
        grad = std::move(trial_grad);
        curvature = std::move(trial_curv);
        accepted = true;
        break;
      }
    }
    ++post.newton_steps;
    if (!accepted) {
      // No ascent left at working precision.
      post.grad_norm = grad.cwiseAbs().maxCoeff();
      converged = post.grad_norm < 1e3 * newton.grad_tol;
      break;
    }
  }
  post.grad_norm = grad.cwiseAbs().maxCoeff();
  if (!converged && post.grad_norm >= newton.grad_tol) {
    std::ostringstream msg;
    msg << "Laplace E-step did not converge in " << post.newton_steps << " Newton steps; last max-abs gradient "
        << post.grad_norm;
    throw ConvergenceError(msg.str());
  }

  build_hessian(model, curvature, post.diag, post.lower);
  const BlockSolve fac = factor(post.diag, post.lower);
  post.log_joint = f;
  post.log_evidence = f + 0.5 * static_cast<double>(n * p) * normal::kLog2Pi - 0.5 * fac.logdet;
  post.elbo_bits = n > 0 ? post.log_evidence / (static_cast<double>(n) * std::numbers::ln2) : 0.0;

  // Selected inversion: marginal and lag-one covariances.
  post.cov.assign(n, Mat());
  post.cross.assign(n > 0 ? n - 1 : 0, Mat());
  const Mat eye = Mat::Identity(p, p);
  for (Index t = n - 1; t >= 0; --t) {
    const Mat s_inv = fac.schur[t].solve(eye);
    if (t == n - 1) {
      post.cov[t] = s_inv;
      continue;
    }
    const Mat g = s_inv * post.lower[t].transpose();
    post.cov[t] = linalg::symmetrize(s_inv + g * post.cov[t + 1] * g.transpose());
    post.cross[t] = -g * post.cov[t + 1];
  }
  return post;
}

double expected_complete_loglik(const SystemParams& params, const PosteriorApprox& post, const TimeSeries& ts,
                                int quadrature_nodes) {
  const Index p = params.A.rows();
  const Index m = ts.m();
  const Precision q = invert_spd(params.Q, "Q");
  const Precision q0 = invert_spd(params.Q0, "Q0");
  const Stats st = transition_stats(post, ts);
  double total = 0.0;

  for (Index b : st.firsts) {
    const Vec d = post.mode.row(b).transpose() - params.mu0;
    const Mat second = post.cov[b] + d * d.transpose();
    total -= 0.5 * ((q0.inv * second).trace() + q0.logdet + static_cast<double>(p) * normal::kLog2Pi);
  }
  if (st.transitions > 0) {
    Mat ab(p, p + m);
    ab << params.A, params.B;
    const Mat err = st.sxx - ab * st.sxphi.transpose() - st.sxphi * ab.transpose() + ab * st.sphiphi * ab.transpose();
    total -= 0.5 * ((q.inv * err).trace() +
                    static_cast<double>(st.transitions) * (q.logdet + static_cast<double>(p) * normal::kLog2Pi));
  }

  const Hermite& rule = hermite_rule(quadrature_nodes);
  for (int i = 0; i < ts.q(); ++i) {
    Vec theta(p + m);
    theta.head(p) = params.C.row(i).transpose();
    if (m > 0) theta.tail(m) = params.D.row(i).transpose();
    total += emission_objective(theta, i, post, ts, rule);
  }
  return total;
}

SystemParams m_step(const SystemParams& params, const PosteriorApprox& post, const TimeSeries& ts,
                    const EMConfig& cfg) {
  const Index p = params.A.rows();
  const Index m = ts.m();
  SystemParams next = params;
  const Stats st = transition_stats(post, ts);

  if (st.transitions > 0) {
    Eigen::LDLT<Mat> ldlt(st.sphiphi);
    Mat ab;
    const double scale = st.sphiphi.diagonal().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12) {
      warn("M-step: input/state second moments are degenerate; using a ridge-regularised solve");
      const Mat reg = st.sphiphi + 1e-8 * std::max(scale, 1.0) * Mat::Identity(p + m, p + m);
      ab = Mat(reg.ldlt().solve(st.sxphi.transpose())).transpose();
    } else {
      ab = Mat(ldlt.solve(st.sxphi.transpose())).transpose();
    }
    next.A = ab.leftCols(p);
    next.B = ab.rightCols(m);
    const Mat qhat = (st.sxx - ab * st.sxphi.transpose()) / static_cast<double>(st.transitions);
    next.Q = floor_cov(qhat, cfg.variance_floor);
  }

  Vec mu0 = Vec::Zero(p);
  for (Index b : st.firsts) mu0 += post.mode.row(b).transpose();
  mu0 /= static_cast<double>(st.firsts.size());
  Mat q0 = Mat::Zero(p, p);
  for (Index b : st.firsts) {
    const Vec d = post.mode.row(b).transpose() - mu0;
    q0 += post.cov[b] + d * d.transpose();
  }
  next.mu0 = mu0;
  next.Q0 = floor_cov(q0 / static_cast<double>(st.firsts.size()), cfg.variance_floor);

  for (int i = 0; i < ts.q(); ++i) {
    Vec theta(p + m);
    theta.head(p) = params.C.row(i).transpose();
    if (m > 0) theta.tail(m) = params.D.row(i).transpose();
    theta = update_emission_row(std::move(theta), i, post, ts, cfg);
    next.C.row(i) = theta.head(p).transpose();
    if (m > 0) next.D.row(i) = theta.tail(m).transpose();
  }
  return next;
}

SystemParams sanitize_for_em(SystemParams params, double variance_floor) {
  const Index p = params.A.rows();
  const double radius = linalg::spectral_radius(params.A);
  if (radius >= 0.999) {
    std::ostringstream msg;
    msg << "initial A has spectral radius " << radius << "; scaled to 0.99 for EM";
    warn(msg.str());
    params.A *= 0.99 / radius;
  }
  params.Q = floor_cov(params.Q, variance_floor);
  if (params.mu0.size() != p) params.mu0 = Vec::Zero(p);
  if (params.Q0.rows() != p || params.Q0.cols() != p) params.Q0 = stationary_latent_cov(params.A, params.Q);
  params.Q0 = floor_cov(params.Q0, variance_floor);
  return params;
}

EMTrace run_em(const SystemParams& init, const TimeSeries& ts, const EMConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  EMTrace trace;
  trace.params = sanitize_for_em(init, cfg.variance_floor);
  const Dimensions dims = trace.params.dims();
  trace.mode = cfg.conv_mode != ConvMode::kAuto ? cfg.conv_mode
               : dims.q >= dims.p               ? ConvMode::kGainDelta
                                                : ConvMode::kEvidenceDelta;

  auto safe_gain = [](const SystemParams& prm) -> std::optional<Mat> {
    try {
      return gain(prm);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };

  Mat warm;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const PosteriorApprox post = e_step(trace.params, ts, cfg.newton, warm.size() > 0 ? &warm : nullptr);
    warm = post.mode;
    SystemParams next = m_step(trace.params, post, ts, cfg);

    EMIteration it;
    it.iter = iter;
    it.elbo_bits = post.elbo_bits;
    const auto g_old = safe_gain(trace.params);
    const auto g_new = safe_gain(next);
    it.gain_delta = g_old && g_new && g_old->size() > 0 ? (*g_new - *g_old).cwiseAbs().mean()
                                                        : std::numeric_limits<double>::infinity();
    it.seconds = seconds_since(start);

    if (!trace.iterations.empty()) {
      const double drop = trace.iterations.back().elbo_bits - it.elbo_bits;
      if (drop > 0.01) {
        ++trace.flagged_decreases;
        std::ostringstream msg;
        msg << "EM iteration " << iter << ": ELBO decreased by " << drop << " bits/sample";
        warn(msg.str());
      }
    }
    const bool met = trace.mode == ConvMode::kGainDelta
                         ? it.gain_delta < cfg.gain_tol
                         : !trace.iterations.empty() &&
                               std::abs(it.elbo_bits - trace.iterations.back().elbo_bits) < cfg.evidence_tol_bits;
    trace.iterations.push_back(it);
    trace.params = std::move(next);
    trace.iters = iter;
    if (met && !trace.converged) {
      trace.converged = true;
      trace.converged_iter = iter;
      if (cfg.stop_at_convergence) break;
    }
  }
  trace.em_seconds = seconds_since(start);
  return trace;
}

SystemParams random_init(const Dimensions& dims, std::uint64_t seed) {
  dims.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> radius(0.5, 0.95);
  auto draw = [&](Index rows, Index cols, double scale) {
    Mat out(rows, cols);
    for (Index j = 0; j < cols; ++j) {
      for (Index i = 0; i < rows; ++i) out(i, j) = scale * gauss(rng);
    }
    return out;
  };
  SystemParams s = SystemParams::zeros(dims);
  Mat a = draw(dims.p, dims.p, 1.0);
  double rho = linalg::spectral_radius(a);
  while (rho < 1e-8) {
    a = draw(dims.p, dims.p, 1.0);
    rho = linalg::spectral_radius(a);
  }
  s.A = a * (radius(rng) / rho);
  s.B = draw(dims.p, dims.m, 0.1);
  s.C = draw(dims.q, dims.p, 0.3);
  s.D = draw(dims.q, dims.m, 0.1);
  s.Q = 0.1 * Mat::Identity(dims.p, dims.p);
  s.mu0 = Vec::Zero(dims.p);
  s.Q0 = stationary_latent_cov(s.A, s.Q);
  return s;
}

SystemParams gaussian_init(const TimeSeries& ts, const HankelConfig& cfg, int p) {
  return gauss_baseline(ts, cfg, p).params;
}

SystemParams bestlds_init(const TimeSeries& ts, const HankelConfig& cfg, int p) {
  return fit_bestlds(ts, cfg, p).params;
}

}  // namespace bestlds
