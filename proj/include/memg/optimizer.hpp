#pragma once

#include <vector>

#include "memg/model.hpp"
#include "memg/types.hpp"

// Damped least-squares fitting of the echo model. The scheme follows
// Marquardt's scaling: the normal equations carry a damping term built from
// the squared diagonal of J^T J, the damping factor moves down after an
// accepted step and up after a rejected one, and the returned parameters are
// the best iterate seen rather than the last one.

namespace memg {

struct LMConfig {
  int max_iterations = 200;
  double damping_init = 1e-2;
  double damping_factor = 10.0;  // divide on accept, multiply on reject
  double damping_limit = 1e12;   // give up on the stage past this
  double loss_tol = 1e-10;       // relative decrease counted as negligible
  int loss_tol_streak = 3;       // negligible accepted steps in a row before stopping
  double grad_tol = 1e-10;       // infinity norm of the loss gradient
};

// One candidate evaluation. loss is +inf when the linear solve failed.
struct LMRecord {
  double loss;
  double damping;
  bool accepted;
};

struct LMTrace {
  double initial_loss = 0.0;
  std::vector<LMRecord> records;
  int best_iteration = -1;  // accepted record with minimal loss; -1 keeps the start
  bool aborted = false;     // damping limit exceeded
  bool hit_iteration_cap = false;

  int accepted_count() const {
    int n = 0;
    for (const auto& r : records) n += r.accepted ? 1 : 0;
    return n;
  }

  double best_loss() const {
    return best_iteration < 0 ? initial_loss : records[static_cast<std::size_t>(best_iteration)].loss;
  }
};

// y - M(ps; x). Throws when the axis and data lengths differ.
Eigen::VectorXd residual(const ParamSetd& ps, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                         bool oscillating = true);
Eigen::VectorXd residual(const ParamSetd& ps, const Frame& frame, bool oscillating = true);

// Squared 2-norm of the residual.
double loss(const ParamSetd& ps, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
            bool oscillating = true);
double loss(const ParamSetd& ps, const Frame& frame, bool oscillating = true);

struct LMStep {
  ParamSetd candidate;      // phases re-normalized into (-pi, pi]
  Eigen::VectorXd delta;    // candidate = current - delta on the active parameters
};

// Forms and solves the damped normal equations once at the given damping.
// Throws SingularSystemError when the system is rank deficient even under the
// rank-revealing fallback.
LMStep lm_step(const ParamSetd& ps, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
               double damping, const ParamMask& mask = kAllParams, bool oscillating = true);
LMStep lm_step(const ParamSetd& ps, const Frame& frame, double damping,
               const ParamMask& mask = kAllParams, bool oscillating = true);

struct MinimizeResult {
  ParamSetd params;
  LMTrace trace;
};

// Full damped iteration with accept/reject, best-iterate tracking and the
// stopping rules from LMConfig. Candidates with negative spreads are
// canonicalized to sigma > 0 (flipping eta, which leaves the model unchanged).
MinimizeResult minimize(const ParamSetd& start, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                        const LMConfig& config = {}, const ParamMask& mask = kAllParams,
                        bool oscillating = true);
MinimizeResult minimize(const ParamSetd& start, const Frame& frame, const LMConfig& config = {},
                        const ParamMask& mask = kAllParams, bool oscillating = true);

}  // namespace memg
