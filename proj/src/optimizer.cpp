#include "memg/optimizer.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>

namespace memg {

Eigen::VectorXd residual(const ParamSetd& ps, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                         bool oscillating) {
  if (x.size() != y.size()) throw UsageError("residual: axis and data lengths differ");
  return y - eval_model(ps, x, oscillating);
}

double loss(const ParamSetd& ps, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
            bool oscillating) {
  return residual(ps, x, y, oscillating).squaredNorm();
}

Eigen::VectorXd residual(const ParamSetd& ps, const Frame& frame, bool oscillating) {
  return residual(ps, frame.time_axis(), frame.samples, oscillating);
}

double loss(const ParamSetd& ps, const Frame& frame, bool oscillating) {
  return loss(ps, frame.time_axis(), frame.samples, oscillating);
}

namespace {

// Solves (A + damping * diag(A)^2) s = rhs with A = J^T J. The parameter
// columns differ by many orders of magnitude, which the squared-diagonal
// damping amplifies, so the system is first rescaled to unit diagonal;
// that removes the column-scaling part of the conditioning and leaves the
// solution unchanged. Cholesky first; if that fails, a rank-revealing
// decomposition, which must report full rank.
Eigen::VectorXd solve_damped(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs,
                             double damping) {
  const Eigen::Index n = A.cols();
  Eigen::MatrixXd B = A;
  B.diagonal() += damping * A.diagonal().cwiseProduct(A.diagonal());

  Eigen::VectorXd scale(n);
  for (Eigen::Index i = 0; i < n; ++i)
    scale[i] = B(i, i) > 0.0 ? 1.0 / std::sqrt(B(i, i)) : 1.0;
  Eigen::MatrixXd Bs = scale.asDiagonal() * B * scale.asDiagonal();
  Eigen::VectorXd rs = scale.cwiseProduct(rhs);

  Eigen::LLT<Eigen::MatrixXd> llt(Bs);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd t = llt.solve(rs);
    if (t.allFinite()) return scale.cwiseProduct(t);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Bs);
  if (cod.rank() < n) throw SingularSystemError("damped normal equations are rank deficient");
  Eigen::VectorXd t = cod.solve(rs);
  if (!t.allFinite()) throw SingularSystemError("normal-equation solve produced a non-finite step");
  return scale.cwiseProduct(t);
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& J) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(J.cols(), J.cols());
  A.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
  return A.selfadjointView<Eigen::Lower>();
}

// Adds the masked step to the active parameters and re-normalizes phases.
ParamSetd apply_step(const ParamSetd& ps, const Eigen::VectorXd& s, const ParamMask& mask) {
  ParamSetd out = ps;
  int i = 0;
  for (auto& c : out.components)
    for (int d = 0; d < kParamsPerComponent; ++d)
      if (mask[d]) c[d] += s[i++];
  for (auto& c : out.components) c.phase = normalize_phase(c.phase);
  return out;
}

void canonicalize_spread(ParamSetd& ps) {
  // sigma < 0 describes the same pulse as (|sigma|, -eta); keep sigma positive.
  for (auto& c : ps.components) {
    if (c.sigma < 0.0) {
      c.sigma = -c.sigma;
      c.eta = -c.eta;
    }
  }
}

// Safeguarding bounds derived from the data window. A component whose center
// leaves the window, or whose spread or skew runs away, stops contributing
// curvature: its Jacobian columns collapse and from then on every damped
// system is rank deficient, which would abort the whole fit. Offending
// parameters are clamped back into the box before the candidate is scored,
// so the iteration can keep moving along the boundary instead of rejecting
// every step that grazes it. Only parameters freed by the mask are touched.
struct StepGuard {
  double mu_lo;
  double mu_hi;
  double sigma_max;
  double eta_max;

  static StepGuard for_axis(const Eigen::VectorXd& x) {
    const double lo = x.minCoeff();
    const double hi = x.maxCoeff();
    const double span = std::max(hi - lo, 1.0);
    return {lo, hi, 10.0 * span, 1e3};
  }

  void project(ParamSetd& ps, const ParamMask& mask) const {
    for (auto& c : ps.components) {
      if (mask[1]) c.mu = std::clamp(c.mu, mu_lo, mu_hi);
      if (mask[2]) c.sigma = std::min(c.sigma, sigma_max);
      if (mask[3]) c.eta = std::clamp(c.eta, -eta_max, eta_max);
    }
  }
};

}  // namespace

LMStep lm_step(const ParamSetd& ps, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
               double damping, const ParamMask& mask, bool oscillating) {
  if (x.size() != y.size()) throw UsageError("lm_step: axis and data lengths differ");
  if (!std::isfinite(damping) || damping < 0.0)
    throw UsageError("lm_step: damping must be finite and nonnegative");

  Eigen::MatrixXd J = jacobian(ps, x, mask, oscillating);
  Eigen::VectorXd f = y - eval_model(ps, x, oscillating);
  Eigen::VectorXd s = solve_damped(gram(J), J.transpose() * f, damping);

  LMStep step;
  step.candidate = apply_step(ps, s, mask);
  step.delta = -s;
  return step;
}

LMStep lm_step(const ParamSetd& ps, const Frame& frame, double damping, const ParamMask& mask,
               bool oscillating) {
  return lm_step(ps, frame.time_axis(), frame.samples, damping, mask, oscillating);
}

MinimizeResult minimize(const ParamSetd& start, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                        const LMConfig& cfg, const ParamMask& mask, bool oscillating) {
  if (x.size() != y.size()) throw UsageError("minimize: axis and data lengths differ");
  if (cfg.max_iterations < 0 || cfg.damping_init <= 0.0 || cfg.damping_factor <= 1.0 ||
      cfg.damping_limit <= 0.0 || cfg.loss_tol_streak < 1)
    throw UsageError("minimize: invalid optimizer configuration");

  ParamSetd current = start;
  Eigen::VectorXd model_cur = eval_model(current, x, oscillating);
  double cur_loss = (y - model_cur).squaredNorm();
  if (!std::isfinite(cur_loss)) throw NumericError("minimize: start parameters give non-finite loss");
  const StepGuard guard = StepGuard::for_axis(x);

  LMTrace trace;
  trace.initial_loss = cur_loss;

  ParamSetd best = current;
  double best_loss = cur_loss;
  double damping = cfg.damping_init;
  int streak = 0;

  Eigen::MatrixXd A;   // J^T J at the current iterate
  Eigen::VectorXd rhs; // J^T f at the current iterate
  bool fresh = false;

  int iter = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    if (!fresh) {
      // the model at the current iterate was already evaluated when its loss
      // was scored, so only the jacobian is rebuilt here
      Eigen::MatrixXd J = jacobian(current, x, mask, oscillating);
      A = gram(J);
      rhs = J.transpose() * (y - model_cur);
      fresh = true;
      // grad of the loss is -2 J^T f; stop when already flat.
      if (2.0 * rhs.cwiseAbs().maxCoeff() < cfg.grad_tol) break;
    }

    bool accepted = false;
    double cand_loss = std::numeric_limits<double>::infinity();
    ParamSetd candidate;
    Eigen::VectorXd model_cand;
    try {
      Eigen::VectorXd s = solve_damped(A, rhs, damping);
      candidate = apply_step(current, s, mask);
      canonicalize_spread(candidate);
      guard.project(candidate, mask);
      model_cand = eval_model(candidate, x, oscillating);
      cand_loss = (y - model_cand).squaredNorm();
      if (!std::isfinite(cand_loss)) cand_loss = std::numeric_limits<double>::infinity();
      accepted = cand_loss < cur_loss;
    } catch (const SingularSystemError&) {
      // treated as a rejected step; stronger damping regularizes the system
    }
    trace.records.push_back({cand_loss, damping, accepted});

    if (accepted) {
      // Relative decrease, with the denominator floored at epsilon times the
      // starting loss. Once the loss sits at the floating-point noise floor
      // of the problem, ratios against it are meaningless and the run should
      // wind down rather than churn until the damping limit.
      const double floor =
          std::numeric_limits<double>::epsilon() * std::max(trace.initial_loss, 1.0);
      const double rel = (cur_loss - cand_loss) / std::max(cur_loss, floor);
      streak = rel < cfg.loss_tol ? streak + 1 : 0;
      current = std::move(candidate);
      model_cur = std::move(model_cand);
      cur_loss = cand_loss;
      fresh = false;
      if (cand_loss < best_loss) {
        best = current;
        best_loss = cand_loss;
        trace.best_iteration = static_cast<int>(trace.records.size()) - 1;
      }
      damping /= cfg.damping_factor;
      if (streak >= cfg.loss_tol_streak) break;
    } else {
      damping *= cfg.damping_factor;
      if (damping > cfg.damping_limit) {
        trace.aborted = true;
        break;
      }
    }
  }
  trace.hit_iteration_cap = (iter == cfg.max_iterations);

  return {std::move(best), std::move(trace)};
}

MinimizeResult minimize(const ParamSetd& start, const Frame& frame, const LMConfig& config,
                        const ParamMask& mask, bool oscillating) {
  return minimize(start, frame.time_axis(), frame.samples, config, mask, oscillating);
}

}  // namespace memg
